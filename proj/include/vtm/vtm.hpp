// Copyright 2026 The VTM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "vtm/autodiff.hpp"
#include "vtm/checkpoint.hpp"
#include "vtm/config.hpp"
#include "vtm/corpus.hpp"
#include "vtm/errors.hpp"
#include "vtm/evaluation.hpp"
#include "vtm/generator.hpp"
#include "vtm/inference.hpp"
#include "vtm/metrics.hpp"
#include "vtm/model.hpp"
#include "vtm/objectives.hpp"
#include "vtm/params.hpp"
#include "vtm/sampling.hpp"
#include "vtm/table_encoder.hpp"
#include "vtm/toy_corpus.hpp"
#include "vtm/trainer.hpp"
