#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace runvar {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InsufficientRuns : public Error {
 public:
  explicit InsufficientRuns(std::size_t n)
      : Error("at least 2 runs are required, got " + std::to_string(n)), runs_(n) {}
  std::size_t runs() const noexcept { return runs_; }

 private:
  std::size_t runs_;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class UnknownItem : public Error {
 public:
  explicit UnknownItem(const std::string& item)
      : Error("unknown item: " + item), item_(item) {}
  const std::string& item() const noexcept { return item_; }

 private:
  std::string item_;
};

class MalformedUrl : public Error {
 public:
  MalformedUrl(const std::string& url, const std::string& why)
      : Error("malformed url '" + url + "': " + why), url_(url) {}
  const std::string& url() const noexcept { return url_; }

 private:
  std::string url_;
};

/// The judge could not be reached after all retries.
class OracleUnavailable : public Error {
 public:
  using Error::Error;
};

/// The judge answered, but the payload did not match the expected structure.
class JudgeFormatError : public Error {
 public:
  JudgeFormatError(const std::string& what, std::string raw, std::size_t offset)
      : Error(what + " (at byte " + std::to_string(offset) + ")"),
        raw_(std::move(raw)),
        offset_(offset) {}
  const std::string& raw() const noexcept { return raw_; }
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::string raw_;
  std::size_t offset_;
};

class SchemaViolation : public Error {
 public:
  SchemaViolation(std::string path, const std::string& why)
      : Error("schema violation at '" + path + "': " + why), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

class EmptyActionSet : public Error {
 public:
  EmptyActionSet() : Error("cannot sample from an empty action set") {}
};

class StateSpaceTooLarge : public Error {
 public:
  StateSpaceTooLarge(std::size_t outcomes, std::size_t limit)
      : Error("enumeration needs " + std::to_string(outcomes) + " outcomes (limit " +
              std::to_string(limit) + ")"),
        outcomes_(outcomes) {}
  std::size_t outcomes() const noexcept { return outcomes_; }

 private:
  std::size_t outcomes_;
};

class NoProposals : public Error {
 public:
  NoProposals() : Error("no query proposals to intersect") {}
};

/// Invalid configuration; `path` names the offending field (e.g. "policy.flip_logits[3]").
class ConfigError : public Error {
 public:
  ConfigError(std::string path, const std::string& why)
      : Error(path + ": " + why), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

}  // namespace runvar
