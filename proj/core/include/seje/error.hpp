#pragma once

#include <stdexcept>
#include <string>

namespace seje {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad input data or arguments. The CLI maps these to exit code 1.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Failures that happen while computing on valid inputs (exit code 2).
class RuntimeFailure : public Error {
 public:
  using Error::Error;
};

// ---- corpus ---------------------------------------------------------------

class MalformedRecord : public ValidationError {
 public:
  MalformedRecord(std::string file, std::size_t line, const std::string& why)
      : ValidationError(file + ":" + std::to_string(line) + ": malformed record: " + why),
        file_(std::move(file)),
        line_(line) {}
  const std::string& file() const noexcept { return file_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string file_;
  std::size_t line_;
};

class DanglingReference : public ValidationError {
 public:
  explicit DanglingReference(std::string id)
      : ValidationError("dangling reference to id \"" + id + "\""), id_(std::move(id)) {}
  const std::string& id() const noexcept { return id_; }

 private:
  std::string id_;
};

class DimensionMismatch : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class InvalidSpec : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// ---- wordvec --------------------------------------------------------------

class EmptyCorpus : public ValidationError {
 public:
  EmptyCorpus() : ValidationError("token corpus is empty") {}
};

class VocabularyTooSmall : public ValidationError {
 public:
  explicit VocabularyTooSmall(std::size_t n)
      : ValidationError("vocabulary has " + std::to_string(n) + " token(s); at least 2 required") {}
};

class RaggedRow : public ValidationError {
 public:
  RaggedRow(std::size_t line, std::size_t expected, std::size_t got)
      : ValidationError("line " + std::to_string(line) + ": expected " + std::to_string(expected) +
                        " values, got " + std::to_string(got)) {}
};

class NonNumericField : public ValidationError {
 public:
  NonNumericField(std::size_t line, const std::string& field)
      : ValidationError("line " + std::to_string(line) + ": non-numeric field \"" + field + "\"") {}
};

// ---- textfeat -------------------------------------------------------------

class EmptyRecipeTerms : public ValidationError {
 public:
  explicit EmptyRecipeTerms(std::size_t index)
      : ValidationError("recipe #" + std::to_string(index) + " has no extracted terms"), index_(index) {}
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

class NoTerms : public ValidationError {
 public:
  NoTerms() : ValidationError("no terms to rank") {}
};

class UnknownRecipe : public ValidationError {
 public:
  explicit UnknownRecipe(const std::string& id) : ValidationError("unknown recipe id \"" + id + "\"") {}
};

class NonNumericScore : public ValidationError {
 public:
  NonNumericScore(std::size_t line, const std::string& field)
      : ValidationError("line " + std::to_string(line) + ": non-numeric score \"" + field + "\"") {}
};

// ---- catassign ------------------------------------------------------------

class MissingImageCategory : public ValidationError {
 public:
  explicit MissingImageCategory(const std::string& pair_id)
      : ValidationError("no image category for pair \"" + pair_id + "\"") {}
};

// ---- autodiff / model / losses -------------------------------------------

class ShapeMismatch : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class NonFiniteValue : public RuntimeFailure {
 public:
  using RuntimeFailure::RuntimeFailure;
};

class NormalizationDegenerate : public RuntimeFailure {
 public:
  using RuntimeFailure::RuntimeFailure;
};

class BatchTooSmall : public ValidationError {
 public:
  explicit BatchTooSmall(std::size_t n)
      : ValidationError("batch of " + std::to_string(n) + " is too small; need at least 2") {}
};

class LabelOutOfRange : public ValidationError {
 public:
  LabelOutOfRange(long label, std::size_t n_classes)
      : ValidationError("label " + std::to_string(label) + " outside [0, " + std::to_string(n_classes) + ")") {}
};

// ---- trainer / evalkit ----------------------------------------------------

class DatasetTooSmall : public ValidationError {
 public:
  DatasetTooSmall(std::size_t n, std::size_t batch)
      : ValidationError("dataset of " + std::to_string(n) + " is smaller than batch size " + std::to_string(batch)) {}
};

class SubsetTooLarge : public ValidationError {
 public:
  SubsetTooLarge(std::size_t subset, std::size_t available)
      : ValidationError("subset size " + std::to_string(subset) + " exceeds " + std::to_string(available) +
                        " available items") {}
};

class KeywordNotFound : public ValidationError {
 public:
  explicit KeywordNotFound(std::string keyword)
      : ValidationError("no title contains keyword \"" + keyword + "\""), keyword_(std::move(keyword)) {}
  const std::string& keyword() const noexcept { return keyword_; }

 private:
  std::string keyword_;
};

}  // namespace seje
