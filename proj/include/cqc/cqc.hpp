#pragma once

#include "cqc/capacity2.hpp"
#include "cqc/capacity3.hpp"
#include "cqc/codec.hpp"
#include "cqc/csv.hpp"
#include "cqc/ensemble.hpp"
#include "cqc/error.hpp"
#include "cqc/noisy_channel.hpp"
#include "cqc/parallel.hpp"
#include "cqc/pmf.hpp"
#include "cqc/properties.hpp"
#include "cqc/rng.hpp"
#include "cqc/scheduler.hpp"
#include "cqc/tilt.hpp"
#include "cqc/two_segment.hpp"
