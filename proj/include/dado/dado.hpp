#pragma once

#include "datapool.hpp"
#include "error.hpp"
#include "io.hpp"
#include "loop.hpp"
#include "metrics.hpp"
#include "oracle.hpp"
#include "random.hpp"
#include "strategies.hpp"
#include "surrogate.hpp"
