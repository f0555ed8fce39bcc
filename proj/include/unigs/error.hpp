#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace unigs {

// Base of every error raised by the library. Input-side errors (bad files,
// violated invariants) derive from InputError so callers can tell them apart
// from internal failures.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InputError : public Error {
 public:
  using Error::Error;
};

class IoError : public InputError {
 public:
  IoError(const std::string& path, const std::string& what)
      : InputError(path + ": " + what), path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

// Malformed file content. `offset` is a byte offset for binary formats and a
// 1-based line number for text formats.
class ParseError : public InputError {
 public:
  enum class Unit { Byte, Line };

  ParseError(const std::string& path, Unit unit, std::uint64_t offset,
             const std::string& what)
      : InputError(path + (unit == Unit::Byte ? " (byte " : " (line ") +
                   std::to_string(offset) + "): " + what),
        path_(path),
        unit_(unit),
        offset_(offset) {}

  const std::string& path() const { return path_; }
  Unit unit() const { return unit_; }
  std::uint64_t offset() const { return offset_; }

 private:
  std::string path_;
  Unit unit_;
  std::uint64_t offset_;
};

class InvariantError : public InputError {
 public:
  using InputError::InputError;
};

class ContractViolation : public Error {
 public:
  using Error::Error;
};

// A tile's fragment lists outgrew RenderSettings::max_fragments_per_tile.
class CapacityError : public Error {
 public:
  CapacityError(int tile_x, int tile_y, std::size_t fragments)
      : Error("fragment capacity exceeded in tile (" + std::to_string(tile_x) +
              ", " + std::to_string(tile_y) + "): " +
              std::to_string(fragments) + " fragments"),
        tile_x_(tile_x),
        tile_y_(tile_y) {}
  int tile_x() const { return tile_x_; }
  int tile_y() const { return tile_y_; }

 private:
  int tile_x_;
  int tile_y_;
};

}  // namespace unigs
