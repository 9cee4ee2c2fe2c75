#pragma once

#include <string>

namespace drqr {

/// Porter stemming algorithm (the classic reference behaviour, including the
/// step-2 bli->ble / logi->log amendments and the length<=2 guard of the
/// reference implementation). Expects a lowercase word.
std::string porter_stem(std::string word);

}  // namespace drqr
