#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hybridrec {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Data errors: bad input files, empty corpora, unusable model files.

class DataError : public Error {
 public:
  using Error::Error;
};

class MalformedRecord : public DataError {
 public:
  MalformedRecord(std::string file, std::size_t line, std::string reason)
      : DataError("MalformedRecord: " + file + ":" + std::to_string(line) + ": " + reason),
        file_(std::move(file)),
        line_(line),
        reason_(std::move(reason)) {}

  [[nodiscard]] const std::string& file() const { return file_; }
  [[nodiscard]] std::size_t line() const { return line_; }
  [[nodiscard]] const std::string& reason() const { return reason_; }

 private:
  std::string file_;
  std::size_t line_;
  std::string reason_;
};

class UnknownFormat : public DataError {
 public:
  explicit UnknownFormat(const std::string& name) : DataError("UnknownFormat: " + name) {}
};

class EmptyCorpus : public DataError {
 public:
  explicit EmptyCorpus(const std::string& what = "corpus has no interactions")
      : DataError("EmptyCorpus: " + what) {}
};

class EmptyAfterFiltering : public DataError {
 public:
  explicit EmptyAfterFiltering(std::size_t k)
      : DataError("EmptyAfterFiltering: no interactions survive the " + std::to_string(k) +
                  "-core filter") {}
};

class InsufficientUsers : public DataError {
 public:
  explicit InsufficientUsers(const std::string& what) : DataError("InsufficientUsers: " + what) {}
};

class EmptyInput : public DataError {
 public:
  explicit EmptyInput(const std::string& what) : DataError("EmptyInput: " + what) {}
};

class IoError : public DataError {
 public:
  explicit IoError(const std::string& what) : DataError("IoError: " + what) {}
};

class ModelFormatError : public DataError {
 public:
  explicit ModelFormatError(const std::string& what) : DataError("ModelFormatError: " + what) {}
};

// ---------------------------------------------------------------------------
// Contract violations by the caller.

class ArgumentError : public Error {
 public:
  using Error::Error;
};

class IdOutOfRange : public ArgumentError {
 public:
  explicit IdOutOfRange(const std::string& what) : ArgumentError("IdOutOfRange: " + what) {}
};

class DomainError : public ArgumentError {
 public:
  explicit DomainError(const std::string& what) : ArgumentError("DomainError: " + what) {}
};

class ZeroVector : public ArgumentError {
 public:
  ZeroVector() : ArgumentError("ZeroVector: cosine similarity of a zero-norm embedding") {}
};

class NoCandidate : public ArgumentError {
 public:
  explicit NoCandidate(const std::string& what) : ArgumentError("NoCandidate: " + what) {}
};

class MissingField : public ArgumentError {
 public:
  MissingField(const std::string& task, const std::string& field)
      : ArgumentError("MissingField: task " + task + " requires " + field) {}
};

class EmptyHistory : public ArgumentError {
 public:
  EmptyHistory() : ArgumentError("EmptyHistory: similar-user history is empty") {}
};

class EmptyPrediction : public ArgumentError {
 public:
  EmptyPrediction() : ArgumentError("EmptyPrediction: conventional prediction text is empty") {}
};

class IncompletePermutation : public ArgumentError {
 public:
  explicit IncompletePermutation(const std::string& what)
      : ArgumentError("IncompletePermutation: " + what) {}
};

class DivergedTraining : public Error {
 public:
  explicit DivergedTraining(const std::string& what) : Error("DivergedTraining: " + what) {}
};

class Unparseable : public Error {
 public:
  explicit Unparseable(const std::string& what) : Error("Unparseable: " + what) {}
};

// ---------------------------------------------------------------------------
// LLM transport failures. All carry the number of attempts that were made.

class LlmError : public Error {
 public:
  LlmError(const std::string& kind, const std::string& what, int attempts)
      : Error(kind + ": " + what + " (after " + std::to_string(attempts) + " attempt" +
              (attempts == 1 ? "" : "s") + ")"),
        attempts_(attempts) {}

  [[nodiscard]] int attempts() const { return attempts_; }

 private:
  int attempts_;
};

class Timeout : public LlmError {
 public:
  Timeout(const std::string& what, int attempts) : LlmError("Timeout", what, attempts) {}
};

class TransportError : public LlmError {
 public:
  TransportError(const std::string& what, int attempts)
      : LlmError("TransportError", what, attempts) {}
};

class RateLimited : public LlmError {
 public:
  RateLimited(const std::string& what, int attempts) : LlmError("RateLimited", what, attempts) {}
};

}  // namespace hybridrec
