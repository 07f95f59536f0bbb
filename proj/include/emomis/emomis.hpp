#pragma once

#include "emomis/annotate.hpp"
#include "emomis/corpus.hpp"
#include "emomis/eval.hpp"
#include "emomis/explain.hpp"
#include "emomis/features.hpp"
#include "emomis/models/model.hpp"
#include "emomis/pipeline.hpp"
