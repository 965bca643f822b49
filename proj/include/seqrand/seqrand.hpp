#pragma once

#include "seqrand/error.hpp"
#include "seqrand/qsim.hpp"
#include "seqrand/scenario.hpp"
#include "seqrand/protocol.hpp"
#include "seqrand/bell.hpp"
#include "seqrand/sdp.hpp"
#include "seqrand/npa.hpp"
#include "seqrand/parallel.hpp"
#include "seqrand/commands.hpp"
