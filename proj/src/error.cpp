#include "tracklabel/error.hpp"

namespace tracklabel {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidParameter: return "invalid-parameter";
    case ErrorKind::InvalidInput: return "invalid-input";
    case ErrorKind::FullyMasked: return "fully-masked-frame";
    case ErrorKind::ExternalDetector: return "external-detector";
    case ErrorKind::InternalConsistency: return "internal-consistency";
    case ErrorKind::Io: return "io";
    case ErrorKind::Usage: return "usage";
  }
  return "unknown";
}

}  // namespace tracklabel
