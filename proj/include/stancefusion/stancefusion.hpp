#pragma once

// Umbrella header for the whole library.

#include "stancefusion/artifact.hpp"
#include "stancefusion/config.hpp"
#include "stancefusion/corpus.hpp"
#include "stancefusion/corpus_jsonl.hpp"
#include "stancefusion/embedding_cache.hpp"
#include "stancefusion/encoder.hpp"
#include "stancefusion/error.hpp"
#include "stancefusion/eval.hpp"
#include "stancefusion/fusion.hpp"
#include "stancefusion/hashing.hpp"
#include "stancefusion/label.hpp"
#include "stancefusion/mlp.hpp"
#include "stancefusion/pca.hpp"
#include "stancefusion/rumoureval.hpp"
#include "stancefusion/serialize.hpp"
#include "stancefusion/textprep.hpp"
#include "stancefusion/tfidf.hpp"
