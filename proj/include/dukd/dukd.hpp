#pragma once

#include "dukd/augment.hpp"
#include "dukd/checkpoint.hpp"
#include "dukd/dataset.hpp"
#include "dukd/error.hpp"
#include "dukd/experiment.hpp"
#include "dukd/image.hpp"
#include "dukd/losses.hpp"
#include "dukd/metrics.hpp"
#include "dukd/model.hpp"
#include "dukd/optim.hpp"
#include "dukd/png_io.hpp"
#include "dukd/report.hpp"
#include "dukd/resize.hpp"
#include "dukd/rng.hpp"
#include "dukd/trainer.hpp"
#include "dukd/upcycle.hpp"
