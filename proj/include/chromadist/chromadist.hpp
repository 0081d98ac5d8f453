// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "chromadist/baseline.hpp"
#include "chromadist/cdest/network.hpp"
#include "chromadist/cdest/parameters.hpp"
#include "chromadist/cdest/train.hpp"
#include "chromadist/checkpoint.hpp"
#include "chromadist/color.hpp"
#include "chromadist/corpus.hpp"
#include "chromadist/discretize.hpp"
#include "chromadist/error.hpp"
#include "chromadist/evaluate.hpp"
#include "chromadist/synthetic.hpp"
#include "chromadist/tokenize.hpp"
