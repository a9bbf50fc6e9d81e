#ifndef DEFCAST_DEFCAST_HPP_
#define DEFCAST_DEFCAST_HPP_

#include "defcast/errors.hpp"
#include "defcast/game.hpp"
#include "defcast/kernel.hpp"
#include "defcast/lexroot.hpp"
#include "defcast/forecaster.hpp"
#include "defcast/protocol.hpp"
#include "defcast/io.hpp"
#include "defcast/experiment.hpp"

#endif // DEFCAST_DEFCAST_HPP_
