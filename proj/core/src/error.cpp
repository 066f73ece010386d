#include "axle/error.hpp"

namespace axle {

std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::InvalidInput: return "invalid input";
        case ErrorKind::InvalidPassage: return "invalid passage";
        case ErrorKind::InvalidLabels: return "invalid labels";
        case ErrorKind::OutOfRange: return "out of range";
        case ErrorKind::Config: return "config error";
        case ErrorKind::WindowTooShort: return "window too short";
        case ErrorKind::ScaleTooLarge: return "scale too large";
        case ErrorKind::DurationTooShort: return "duration too short";
        case ErrorKind::TrainingDiverged: return "training diverged";
        case ErrorKind::Io: return "i/o error";
    }
    return "error";
}

}  // namespace axle
