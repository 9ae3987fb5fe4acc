#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace sstd {

enum class Errc {
  file_not_found,
  io_error,
  unsupported_format,
  clip_too_short,
  too_few_frames,
  dimension_mismatch,
  empty_input,
  empty_collection,
  unknown_grapheme,
  unknown_phone,
  parse_error,
  duplicate_entry,
  invariant_violation,
  network_too_large,
  empty_reference,
  missing_speaker_metadata,
  invalid_argument,
};

inline const char* to_string(Errc code) {
  switch (code) {
    case Errc::file_not_found: return "FileNotFound";
    case Errc::io_error: return "IoError";
    case Errc::unsupported_format: return "UnsupportedFormat";
    case Errc::clip_too_short: return "ClipTooShort";
    case Errc::too_few_frames: return "TooFewFrames";
    case Errc::dimension_mismatch: return "DimensionMismatch";
    case Errc::empty_input: return "EmptyInput";
    case Errc::empty_collection: return "EmptyCollection";
    case Errc::unknown_grapheme: return "UnknownGrapheme";
    case Errc::unknown_phone: return "UnknownPhone";
    case Errc::parse_error: return "ParseError";
    case Errc::duplicate_entry: return "DuplicateEntry";
    case Errc::invariant_violation: return "InvariantViolation";
    case Errc::network_too_large: return "NetworkTooLarge";
    case Errc::empty_reference: return "EmptyReference";
    case Errc::missing_speaker_metadata: return "MissingSpeakerMetadata";
    case Errc::invalid_argument: return "InvalidArgument";
  }
  return "Unknown";
}

/// Every failure in the library is reported as an Error carrying a code.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

/// No table entry matches the text at `position` (byte offset).
class UnknownGraphemeError : public Error {
 public:
  UnknownGraphemeError(std::size_t position, std::string character)
      : Error(Errc::unknown_grapheme,
              "no grapheme matches '" + character + "' at byte " + std::to_string(position)),
        position_(position),
        character_(std::move(character)) {}

  std::size_t position() const noexcept { return position_; }
  const std::string& character() const noexcept { return character_; }

 private:
  std::size_t position_;
  std::string character_;
};

}  // namespace sstd
