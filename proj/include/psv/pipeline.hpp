#pragma once

#include "psv/pipeline/checkpoint.hpp"
#include "psv/pipeline/config.hpp"
#include "psv/pipeline/datasets.hpp"
#include "psv/pipeline/evaluate.hpp"
#include "psv/pipeline/model.hpp"
#include "psv/pipeline/report.hpp"
#include "psv/pipeline/train.hpp"
