#pragma once

#include "qnet/coupling.hpp"
#include "qnet/exact.hpp"
#include "qnet/fixtures.hpp"
#include "qnet/io.hpp"
#include "qnet/stability.hpp"
#include "qnet/version.hpp"
