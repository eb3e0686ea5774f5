#pragma once

#include "modl/error.hpp"
#include "modl/modl_math.hpp"
#include "modl/rng.hpp"
#include "modl/parallel.hpp"
#include "modl/csv.hpp"
#include "modl/schema.hpp"
#include "modl/dataset.hpp"
#include "modl/preparation.hpp"
#include "modl/feature.hpp"
#include "modl/snb.hpp"
#include "modl/explain.hpp"
#include "modl/report.hpp"
#include "modl/pipeline.hpp"
