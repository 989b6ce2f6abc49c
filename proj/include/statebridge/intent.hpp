#pragma once

#include <string_view>

#include "statebridge/protocol.hpp"

namespace statebridge {

/// Case-insensitive keyword match over the object vocabulary; the earliest
/// matching word in the utterance wins. Throws Error{NoIntent}.
///   water | drink | bottle        -> WATER
///   chips | snack | snacks        -> CHIPS
///   fruit | apple | banana | orange -> FRUIT
TaskIntent parse_intent(std::string_view utterance);

}  // namespace statebridge
