#include "omniguide/error.hpp"

namespace omniguide {

std::string_view to_string(Errc code) noexcept {
    switch (code) {
    case Errc::invalid_input: return "invalid_input";
    case Errc::dimension: return "dimension";
    case Errc::precondition: return "precondition";
    case Errc::capacity: return "capacity";
    case Errc::range: return "range";
    case Errc::lifecycle: return "lifecycle";
    case Errc::incompatible: return "incompatible";
    case Errc::transport: return "transport";
    case Errc::protocol: return "protocol";
    case Errc::validation: return "validation";
    case Errc::contract: return "contract";
    case Errc::io: return "io";
    }
    return "unknown";
}

}  // namespace omniguide
