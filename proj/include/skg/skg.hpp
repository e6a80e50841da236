#pragma once

#include "skg/amplify.hpp"
#include "skg/challenge.hpp"
#include "skg/common.hpp"
#include "skg/config.hpp"
#include "skg/dataio.hpp"
#include "skg/entropy.hpp"
#include "skg/eval.hpp"
#include "skg/fft.hpp"
#include "skg/filterbank.hpp"
#include "skg/parallel.hpp"
#include "skg/pipeline.hpp"
#include "skg/quantize.hpp"
#include "skg/reconcile.hpp"
#include "skg/sha256.hpp"
#include "skg/waveform.hpp"
