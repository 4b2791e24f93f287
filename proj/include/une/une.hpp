#pragma once

// Umbrella header for the library (the CLI lives in une/cli.hpp).

#include "une/editing.hpp"
#include "une/error.hpp"
#include "une/gaussianity.hpp"
#include "une/latent_store.hpp"
#include "une/linalg.hpp"
#include "une/probing.hpp"
#include "une/report.hpp"
#include "une/shared_space.hpp"
#include "une/synthetic.hpp"
#include "une/transfer.hpp"
