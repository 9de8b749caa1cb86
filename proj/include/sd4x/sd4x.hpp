#pragma once

#include "sd4x/blackbox.hpp"
#include "sd4x/common.hpp"
#include "sd4x/csv.hpp"
#include "sd4x/dataset.hpp"
#include "sd4x/error.hpp"
#include "sd4x/evaluation.hpp"
#include "sd4x/neighborhood.hpp"
#include "sd4x/pattern.hpp"
#include "sd4x/ridge.hpp"
#include "sd4x/splitter.hpp"
#include "sd4x/synthetic.hpp"
#include "sd4x/text.hpp"
