#pragma once

#include "sstd/audio_features.hpp"
#include "sstd/confnet.hpp"
#include "sstd/dtw.hpp"
#include "sstd/error.hpp"
#include "sstd/eval.hpp"
#include "sstd/g2p.hpp"
#include "sstd/lexicon.hpp"
#include "sstd/p2w.hpp"
#include "sstd/pipeline.hpp"
#include "sstd/synth.hpp"
