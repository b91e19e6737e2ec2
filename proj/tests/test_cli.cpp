// Exercises the installed binary end to end: exit codes, file outputs,
// seed overrides, determinism of rerun commands.

#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "idpo/denoiser.hpp"
#include "idpo/preference.hpp"
#include "idpo/rng.hpp"
#include "idpo/schedule.hpp"

using namespace idpo;
namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args) {
    const std::string cmd = std::string(IDPO_CLI_PATH) + " " + args + " 2>/dev/null";
    const int status = std::system(cmd.c_str());
    if (status == -1) return -1;
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path work_dir() {
    const auto dir = fs::temp_directory_path() / "idpo_cli_test";
    fs::create_directories(dir);
    return dir;
}

std::string tiny_config(const std::string& extra = "") {
    static int counter = 0;
    const auto path = work_dir() / ("cfg_" + std::to_string(counter++) + ".cfg");
    std::ofstream out(path);
    out << "seed = 11\n"
           "schedule.T = 6\n"
           "schedule.alpha_T = 0.02\n"
           "data.n_conditions = 4\n"
           "data.samples_per_condition = 16\n"
           "model.hidden_dim = 16\n"
           "pretrain.steps = 40\n"
           "pretrain.batch_size = 8\n"
           "pretrain.report_interval = 20\n"
           "pretrain.lr = 3e-3\n"
           "pretrain.loss_gate = 10\n"
           "pairgen.pool_size = 4\n"
           "pairgen.pools_per_condition = 2\n"
           "posttrain.steps = 12\n"
           "posttrain.eval_interval = 6\n"
           "posttrain.eval_samples_per_condition = 2\n"
           "dpo.beta = 20\n"
           "compare.steps = 6\n"
           "compare.reward_threshold = 100\n"
           "diagnose.T_list = 3,6\n"
           "diagnose.probe_count = 4\n"
        << extra;
    return path.string();
}

std::vector<char> slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    return std::vector<char>(std::istreambuf_iterator<char>(in), {});
}

} // namespace

TEST_CASE("missing config file exits 2") {
    REQUIRE(run_cli("pretrain --config /nonexistent/nope.cfg") == 2);
    REQUIRE(run_cli("pretrain") == 2);          // missing required option
    REQUIRE(run_cli("not-a-command") == 2);     // unknown subcommand
}

TEST_CASE("malformed config line exits 2") {
    const auto path = work_dir() / "broken.cfg";
    std::ofstream(path) << "seed 11\n";
    REQUIRE(run_cli("pretrain --config " + path.string()) == 2);
}

TEST_CASE("pretrain writes a checkpoint; seed override changes its bytes") {
    const std::string cfg = tiny_config();
    const auto out_a = work_dir() / "run_a";
    const auto out_b = work_dir() / "run_b";
    const auto out_c = work_dir() / "run_c";
    fs::remove_all(out_a);
    fs::remove_all(out_b);
    fs::remove_all(out_c);

    REQUIRE(run_cli("pretrain --config " + cfg + " --out " + out_a.string()) == 0);
    REQUIRE(fs::exists(out_a / "base.ckpt"));
    REQUIRE(fs::exists(out_a / "pretrain_report.csv"));

    // identical rerun is byte-identical
    REQUIRE(run_cli("pretrain --config " + cfg + " --out " + out_b.string()) == 0);
    REQUIRE(slurp(out_a / "base.ckpt") == slurp(out_b / "base.ckpt"));
    REQUIRE(slurp(out_a / "pretrain_report.csv") == slurp(out_b / "pretrain_report.csv"));

    // different seed changes the checkpoint
    REQUIRE(run_cli("pretrain --config " + cfg + " --out " + out_c.string() + " --seed 999") == 0);
    REQUIRE(slurp(out_a / "base.ckpt") != slurp(out_c / "base.ckpt"));
}

TEST_CASE("pairgen counts strict orderings and validates K") {
    const std::string cfg = tiny_config();
    const auto out = work_dir() / "pairs_run";
    fs::remove_all(out);
    REQUIRE(run_cli("pretrain --config " + cfg + " --out " + out.string()) == 0);
    REQUIRE(run_cli("pairgen --config " + cfg + " --out " + out.string()) == 0);
    REQUIRE(fs::exists(out / "pairs.idpr"));
    REQUIRE(fs::exists(out / "pool_scores.csv"));

    // brute-force count from the emitted pool scores
    std::ifstream in(out / "pool_scores.csv");
    std::string line;
    std::getline(in, line);
    REQUIRE(line == "condition,candidate,proximity,spread,aggregate");
    int row = 0;
    std::vector<std::vector<double>> grouped; // aggregate scores per pool, K = 4 rows each
    while (std::getline(in, line)) {
        std::istringstream ss(line);
        std::string tok;
        std::vector<std::string> cols;
        while (std::getline(ss, tok, ',')) cols.push_back(tok);
        REQUIRE(cols.size() == 5);
        if (row % 4 == 0) grouped.emplace_back();
        grouped.back().push_back(std::stod(cols[4]));
        ++row;
    }
    std::size_t want = 0;
    for (const auto& pool : grouped) {
        for (double a : pool) {
            for (double b : pool) {
                if (a > b) ++want;
            }
        }
    }
    const auto pairs = load_pairs((out / "pairs.idpr").string());
    REQUIRE(pairs.size() == want);

    // K = 1 is rejected as a config error
    REQUIRE(run_cli("pairgen --config " + cfg + " --out " + out.string() +
                    " --set pairgen.pool_size=1") == 2);

    // deterministic regeneration
    const auto out2 = work_dir() / "pairs_run2";
    fs::remove_all(out2);
    REQUIRE(run_cli("pretrain --config " + cfg + " --out " + out2.string()) == 0);
    REQUIRE(run_cli("pairgen --config " + cfg + " --out " + out2.string()) == 0);
    REQUIRE(slurp(out / "pairs.idpr") == slurp(out2 / "pairs.idpr"));
    REQUIRE(slurp(out / "pool_scores.csv") == slurp(out2 / "pool_scores.csv"));
}

TEST_CASE("posttrain end to end with report rows, unknown variant rejected") {
    const std::string cfg = tiny_config();
    const auto out = work_dir() / "post_run";
    fs::remove_all(out);
    REQUIRE(run_cli("pretrain --config " + cfg + " --out " + out.string()) == 0);
    REQUIRE(run_cli("pairgen --config " + cfg + " --out " + out.string()) == 0);
    REQUIRE(run_cli("posttrain --config " + cfg + " --out " + out.string() +
                    " --variant inversion-dpo") == 0);
    REQUIRE(fs::exists(out / "post_inversion-dpo.ckpt"));

    std::ifstream in(out / "posttrain_report_inversion-dpo.csv");
    std::string line;
    std::getline(in, line);
    REQUIRE(line == "step,loss,margin_mean,pair_accuracy,wallclock_ms");
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    REQUIRE(rows == 12 / 6 + 1);

    REQUIRE(run_cli("posttrain --config " + cfg + " --out " + out.string() +
                    " --variant nonsense-dpo") == 2);

    // --inversion-steps overrides the schedule length
    REQUIRE(run_cli("posttrain --config " + cfg + " --out " + out.string() +
                    " --variant inversion-dpo --inversion-steps 3") == 0);
    const auto [m, s] = load_checkpoint((out / "post_inversion-dpo.ckpt").string());
    REQUIRE(m.data_dim == 2);
    REQUIRE(s.T == 3);
}

TEST_CASE("diagnose on a zero-model stub reports zero roundtrip error") {
    const std::string cfg = tiny_config();
    const auto out = work_dir() / "diag_run";
    fs::remove_all(out);
    fs::create_directories(out);

    // hand-built zero checkpoint
    RngState rng(1);
    Denoiser zero = make_denoiser(2, 16, 16, 4, rng);
    for (Layer& l : zero.layers) {
        for (double& v : l.W.data) v = 0.0;
        for (double& v : l.b.data) v = 0.0;
    }
    save_checkpoint(zero, make_schedule(6, 0.02), (out / "zero.ckpt").string());

    REQUIRE(run_cli("diagnose --config " + cfg + " --out " + out.string() + " --checkpoint " +
                    (out / "zero.ckpt").string()) == 0);
    std::ifstream in(out / "diagnostics.csv");
    std::string line;
    std::getline(in, line);
    REQUIRE(line == "T,metric,value");
    int rows = 0;
    int roundtrip_rows = 0;
    while (std::getline(in, line)) {
        ++rows;
        std::istringstream ss(line);
        std::string T, metric, value;
        std::getline(ss, T, ',');
        std::getline(ss, metric, ',');
        std::getline(ss, value, ',');
        if (metric == "roundtrip_error") {
            ++roundtrip_rows;
            REQUIRE(std::stod(value) < 1e-12);
        }
    }
    REQUIRE(rows == 4); // (T, metric) combinations: 2 x 2
    REQUIRE(roundtrip_rows == 2);
    REQUIRE(fs::exists(out / "traj_inverted_T3.csv"));
    REQUIRE(fs::exists(out / "traj_sampled_T6.csv"));
}

TEST_CASE("compare emits all three variant labels deterministically") {
    const std::string cfg = tiny_config();
    const auto out = work_dir() / "cmp_run";
    fs::remove_all(out);
    REQUIRE(run_cli("pretrain --config " + cfg + " --out " + out.string()) == 0);
    REQUIRE(run_cli("pairgen --config " + cfg + " --out " + out.string()) == 0);
    REQUIRE(run_cli("compare --config " + cfg + " --out " + out.string()) == 0);

    std::ifstream in(out / "compare_summary.csv");
    std::string line;
    std::getline(in, line);
    REQUIRE(line == "variant,steps_to_threshold,final_pair_accuracy,final_reward_mean,threshold");
    std::vector<std::string> variants;
    while (std::getline(in, line)) {
        variants.push_back(line.substr(0, line.find(',')));
    }
    REQUIRE(variants == std::vector<std::string>{"diffusion-dpo", "inversion-dpo",
                                                 "inversion-dpo-single-t"});

    const auto first = slurp(out / "compare.csv");
    REQUIRE(run_cli("compare --config " + cfg + " --out " + out.string()) == 0);
    REQUIRE(slurp(out / "compare.csv") == first);
}
