// Umbrella header.
#pragma once

#include "roiprop/autoencoder.hpp"
#include "roiprop/baselines.hpp"
#include "roiprop/border_following.hpp"
#include "roiprop/core.hpp"
#include "roiprop/data.hpp"
#include "roiprop/eval.hpp"
#include "roiprop/image_io.hpp"
#include "roiprop/pipeline.hpp"
#include "roiprop/postprocess.hpp"
#include "roiprop/synthetic.hpp"
#include "roiprop/temporal.hpp"
