#pragma once

#include "cli.hpp"
#include "config.hpp"
#include "corpus.hpp"
#include "embed.hpp"
#include "embed_external.hpp"
#include "error.hpp"
#include "experiment.hpp"
#include "index.hpp"
#include "keyex.hpp"
#include "kmeans.hpp"
#include "pipeline.hpp"
#include "rankers.hpp"
#include "rerank.hpp"
#include "synthetic.hpp"
#include "termex.hpp"
#include "util.hpp"
