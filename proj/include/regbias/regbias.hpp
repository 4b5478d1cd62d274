#pragma once

#include "regbias/types.hpp"
#include "regbias/coords.hpp"
#include "regbias/dynamics.hpp"
#include "regbias/trackers.hpp"
#include "regbias/tracklets.hpp"
#include "regbias/bias.hpp"
#include "regbias/fusion.hpp"
#include "regbias/crlb.hpp"
