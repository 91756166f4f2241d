#pragma once

#include "tallmcmc/data.hpp"
#include "tallmcmc/dataset.hpp"
#include "tallmcmc/diagnostics.hpp"
#include "tallmcmc/models.hpp"
#include "tallmcmc/proposal.hpp"
#include "tallmcmc/proxy.hpp"
#include "tallmcmc/record_file.hpp"
#include "tallmcmc/rng.hpp"
#include "tallmcmc/samplers/austerity.hpp"
#include "tallmcmc/samplers/common.hpp"
#include "tallmcmc/samplers/confidence.hpp"
#include "tallmcmc/samplers/delayed_acceptance.hpp"
#include "tallmcmc/samplers/firefly.hpp"
#include "tallmcmc/samplers/map.hpp"
#include "tallmcmc/samplers/mh.hpp"
#include "tallmcmc/samplers/naive_subsampling.hpp"
#include "tallmcmc/samplers/rhee_glynn.hpp"
#include "tallmcmc/samplers/sgld.hpp"
#include "tallmcmc/trace.hpp"
