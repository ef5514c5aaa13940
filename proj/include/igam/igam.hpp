#pragma once

#include "igam/constraints.hpp"
#include "igam/csv.hpp"
#include "igam/dataset.hpp"
#include "igam/error.hpp"
#include "igam/eval.hpp"
#include "igam/gam.hpp"
#include "igam/model_io.hpp"
#include "igam/pla.hpp"
