#include "reconprobe/error.hpp"

namespace reconprobe {

MissingInputError::MissingInputError(std::vector<std::string> missing)
    : Error([&] {
        std::string msg = "missing interchange input(s):";
        for (const auto& m : missing) msg += "\n  " + m;
        return msg;
      }()),
      missing_(std::move(missing)) {}

}  // namespace reconprobe
