#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace divbench {

enum class Errc {
  // corpus
  MissingFile,
  MalformedRecord,
  EmptyCorpus,
  TopicMismatch,
  OddCardinality,
  // promptkit
  MissingExemplars,
  UnexpectedExemplars,
  CritiqueHasNoFollowup,
  NotLlmSolution,
  CountMismatch,
  Incoherent,
  // harness
  InvalidParams,
  ProviderError,
  ParseFailure,
  // embedding
  DimensionMismatch,
  MissingEmbedding,
  ZeroVector,
  // diversity
  RankDeficient,
  NotNormalized,
  DegenerateKernel,
  DegenerateHull,
  FacetBudgetExceeded,
  ZeroBaseline,
  ConstantInput,
  // separability
  ClassTooSmall,
  NonFiniteLoss,
  // report-cli
  Config,
  MissingCell,
  InvalidArgument,
  Io,
};

constexpr std::string_view to_string(Errc c) {
  switch (c) {
    case Errc::MissingFile: return "MissingFile";
    case Errc::MalformedRecord: return "MalformedRecord";
    case Errc::EmptyCorpus: return "EmptyCorpus";
    case Errc::TopicMismatch: return "TopicMismatch";
    case Errc::OddCardinality: return "OddCardinality";
    case Errc::MissingExemplars: return "MissingExemplars";
    case Errc::UnexpectedExemplars: return "UnexpectedExemplars";
    case Errc::CritiqueHasNoFollowup: return "CritiqueHasNoFollowup";
    case Errc::NotLlmSolution: return "NotLlmSolution";
    case Errc::CountMismatch: return "CountMismatch";
    case Errc::Incoherent: return "Incoherent";
    case Errc::InvalidParams: return "InvalidParams";
    case Errc::ProviderError: return "ProviderError";
    case Errc::ParseFailure: return "ParseFailure";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::MissingEmbedding: return "MissingEmbedding";
    case Errc::ZeroVector: return "ZeroVector";
    case Errc::RankDeficient: return "RankDeficient";
    case Errc::NotNormalized: return "NotNormalized";
    case Errc::DegenerateKernel: return "DegenerateKernel";
    case Errc::DegenerateHull: return "DegenerateHull";
    case Errc::FacetBudgetExceeded: return "FacetBudgetExceeded";
    case Errc::ZeroBaseline: return "ZeroBaseline";
    case Errc::ConstantInput: return "ConstantInput";
    case Errc::ClassTooSmall: return "ClassTooSmall";
    case Errc::NonFiniteLoss: return "NonFiniteLoss";
    case Errc::Config: return "Config";
    case Errc::MissingCell: return "MissingCell";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::Io: return "Io";
  }
  return "Unknown";
}

/// Base exception for every failure surfaced by the library. The code is the
/// stable, machine-readable part; the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code), detail_(detail) {}

  Errc code() const noexcept { return code_; }
  /// The message without the code prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  Errc code_;
  std::string detail_;
};

/// Raised when a reply holds a different number of list items than requested.
class CountMismatchError : public Error {
 public:
  CountMismatchError(std::size_t found, std::size_t expected)
      : Error(Errc::CountMismatch, "found " + std::to_string(found) + " items, expected " +
                                       std::to_string(expected)),
        found_(found),
        expected_(expected) {}

  std::size_t found() const noexcept { return found_; }
  std::size_t expected() const noexcept { return expected_; }

 private:
  std::size_t found_;
  std::size_t expected_;
};

/// HTTP or transport failure. status is 0 for transport errors.
class ProviderError : public Error {
 public:
  ProviderError(int status, const std::string& detail)
      : Error(Errc::ProviderError, "status " + std::to_string(status) + ": " + detail),
        status_(status) {}

  int status() const noexcept { return status_; }
  bool retryable() const noexcept { return status_ == 0 || status_ == 429 || status_ >= 500; }

 private:
  int status_;
};

/// A line-oriented input could not be decoded. line is 1-based.
class MalformedRecordError : public Error {
 public:
  MalformedRecordError(std::size_t line, const std::string& detail)
      : Error(Errc::MalformedRecord, "line " + std::to_string(line) + ": " + detail), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace divbench
