#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace wetpred {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Raised for bad inputs: malformed files, inconsistent shapes, degenerate
/// data. The CLI maps these to exit code 3; any other `Error` is internal.
class DataError : public Error {
public:
  using Error::Error;
};

#define WETPRED_DATA_ERROR(Name)                                               \
  class Name : public DataError {                                              \
  public:                                                                      \
    using DataError::DataError;                                                \
  }

// texture
WETPRED_DATA_ERROR(ImageTooSmall);

// preprocessing
WETPRED_DATA_ERROR(OutOfRange);
WETPRED_DATA_ERROR(ConstantColumn);
WETPRED_DATA_ERROR(EmptyMatrix);
WETPRED_DATA_ERROR(SchemaMismatch);

// forest
WETPRED_DATA_ERROR(EmptyData);
WETPRED_DATA_ERROR(DimensionMismatch);
WETPRED_DATA_ERROR(KTooLarge);

// neural net
WETPRED_DATA_ERROR(BatchTooSmall);
WETPRED_DATA_ERROR(EmptyBatch);
WETPRED_DATA_ERROR(StaleCache);
WETPRED_DATA_ERROR(NoValidationData);

// evaluation
WETPRED_DATA_ERROR(EmptyVector);
WETPRED_DATA_ERROR(ConstantTarget);
WETPRED_DATA_ERROR(TooFewSamples);

// io
WETPRED_DATA_ERROR(FileNotReadable);
WETPRED_DATA_ERROR(MissingTarget);
WETPRED_DATA_ERROR(EmptyFile);
WETPRED_DATA_ERROR(UnsupportedFormat);
WETPRED_DATA_ERROR(CorruptHeader);
WETPRED_DATA_ERROR(TruncatedData);
WETPRED_DATA_ERROR(VersionMismatch);
WETPRED_DATA_ERROR(CorruptArtifact);

#undef WETPRED_DATA_ERROR

class MalformedRow : public DataError {
public:
  MalformedRow(std::size_t line, const std::string& detail)
      : DataError("line " + std::to_string(line) + ": " + detail), line_(line) {}

  /// 1-based line number in the source file.
  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

} // namespace wetpred
