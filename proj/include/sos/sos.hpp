#pragma once

// Umbrella header for the whole library.

#include "sos/analytics.hpp"
#include "sos/bundle.hpp"
#include "sos/common.hpp"
#include "sos/crypto.hpp"
#include "sos/eventlog.hpp"
#include "sos/netsim.hpp"
#include "sos/registry.hpp"
#include "sos/registry_http.hpp"
#include "sos/routing.hpp"
#include "sos/rng.hpp"
#include "sos/social.hpp"
#include "sos/trace.hpp"
