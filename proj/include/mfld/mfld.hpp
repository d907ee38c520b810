#ifndef MFLD_MFLD_HPP
#define MFLD_MFLD_HPP

#include "mfld/core.hpp"
#include "mfld/rng.hpp"
#include "mfld/ensemble.hpp"
#include "mfld/model.hpp"
#include "mfld/dynamics.hpp"
#include "mfld/gibbs.hpp"
#include "mfld/estimators.hpp"
#include "mfld/diagnostics.hpp"
#include "mfld/toml.hpp"
#include "mfld/config.hpp"
#include "mfld/io.hpp"
#include "mfld/harness.hpp"

#endif  // MFLD_MFLD_HPP
