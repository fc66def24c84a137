#pragma once

#include "tcs/model.hpp"
#include "tcs/functionals.hpp"
#include "tcs/integrator.hpp"
#include "tcs/certificates.hpp"
#include "tcs/diagnostics.hpp"
#include "tcs/scenarios.hpp"
#include "tcs/oracle.hpp"
#include "tcs/io.hpp"
#include "tcs/plot.hpp"
#include "tcs/commands.hpp"
