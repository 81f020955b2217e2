#pragma once

// Umbrella header for the SpecNet library.

#include "specnet/checkpoint.hpp"
#include "specnet/dataset.hpp"
#include "specnet/errors.hpp"
#include "specnet/fft.hpp"
#include "specnet/io.hpp"
#include "specnet/memory.hpp"
#include "specnet/network.hpp"
#include "specnet/optimizer.hpp"
#include "specnet/spectral_block.hpp"
#include "specnet/tensor.hpp"
