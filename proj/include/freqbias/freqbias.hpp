#pragma once

#include "freqbias/error.hpp"
#include "freqbias/numeric.hpp"
#include "freqbias/rng.hpp"
#include "freqbias/parallel.hpp"
#include "freqbias/lti.hpp"
#include "freqbias/variation.hpp"
#include "freqbias/init.hpp"
#include "freqbias/fft.hpp"
#include "freqbias/spectral.hpp"
#include "freqbias/grad.hpp"
#include "freqbias/flow.hpp"
#include "freqbias/seqtrain.hpp"
#include "freqbias/io.hpp"
