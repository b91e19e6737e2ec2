#pragma once

#include "idpo/array.hpp"
#include "idpo/cli.hpp"
#include "idpo/config.hpp"
#include "idpo/dataset.hpp"
#include "idpo/denoiser.hpp"
#include "idpo/diffusion.hpp"
#include "idpo/dpo.hpp"
#include "idpo/errors.hpp"
#include "idpo/gradcheck.hpp"
#include "idpo/inversion.hpp"
#include "idpo/optimizer.hpp"
#include "idpo/preference.hpp"
#include "idpo/rng.hpp"
#include "idpo/schedule.hpp"
#include "idpo/trainer.hpp"
