#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace skybench {

enum class ErrorKind {
  invalid_input,
  degenerate_configuration,
  out_of_projection,
  invalid_quadkey,
  tile_unavailable,
  corrupt_tile,
  invalid_tile,
  network_error,
  invalid_camera,
  manifest_parse_error,
  insufficient_views,
  invalid_batch,
  invalid_shape,
  invalid_taps,
  invalid_pairing,
  io_error,
};

inline constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_input: return "invalid-input";
    case ErrorKind::degenerate_configuration: return "degenerate-configuration";
    case ErrorKind::out_of_projection: return "out-of-projection";
    case ErrorKind::invalid_quadkey: return "invalid-quadkey";
    case ErrorKind::tile_unavailable: return "tile-unavailable";
    case ErrorKind::corrupt_tile: return "corrupt-tile";
    case ErrorKind::invalid_tile: return "invalid-tile";
    case ErrorKind::network_error: return "network-error";
    case ErrorKind::invalid_camera: return "invalid-camera";
    case ErrorKind::manifest_parse_error: return "manifest-parse-error";
    case ErrorKind::insufficient_views: return "insufficient-views";
    case ErrorKind::invalid_batch: return "invalid-batch";
    case ErrorKind::invalid_shape: return "invalid-shape";
    case ErrorKind::invalid_taps: return "invalid-taps";
    case ErrorKind::invalid_pairing: return "invalid-pairing";
    case ErrorKind::io_error: return "io-error";
  }
  return "unknown";
}

// Every failure raised by the library carries a kind so callers (the CLI in
// particular) can map it onto an exit code without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) fail(kind, message);
}

}  // namespace skybench
