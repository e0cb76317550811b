#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace bridges {

/// Base class for every typed error thrown by the library.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// --- circuit_ir ---

class ParseError : public Error {
public:
  ParseError(const std::string& msg, std::size_t byte_offset)
      : Error("parse error at byte " + std::to_string(byte_offset) + ": " + msg),
        offset(byte_offset) {}
  std::size_t offset;
};

class ValidationError : public Error {
public:
  ValidationError(std::string kind_, int node_id_, const std::string& msg)
      : Error("validation error (" + kind_ + ", node " + std::to_string(node_id_) + "): " + msg),
        kind(std::move(kind_)), node_id(node_id_) {}
  std::string kind;  // "arity" | "cycle" | "endpoint" | "duplicate_edge" | "id" | "meta"
  int node_id;
};

class WriteError : public Error {
public:
  explicit WriteError(const std::string& path) : Error("cannot write " + path) {}
};

class NotABijection : public Error {
public:
  explicit NotABijection(const std::string& msg) : Error("not a bijection: " + msg) {}
};

// --- netlist_parser ---

class SyntaxError : public Error {
public:
  SyntaxError(int line_, int col_, std::string expected_)
      : Error("syntax error at " + std::to_string(line_) + ":" + std::to_string(col_) +
              ", expected " + expected_),
        line(line_), col(col_), expected(std::move(expected_)) {}
  int line, col;
  std::string expected;
};

class UndefinedModuleError : public Error {
public:
  explicit UndefinedModuleError(std::string name_)
      : Error("undefined module instantiated: " + name_), name(std::move(name_)) {}
  std::string name;
};

class MultipleDriverError : public Error {
public:
  explicit MultipleDriverError(std::string net_)
      : Error("net has multiple drivers: " + net_), net(std::move(net_)) {}
  std::string net;
};

// --- corpus ---

class UnsupportedWidth : public Error {
public:
  explicit UnsupportedWidth(int width)
      : Error("unsupported design width " + std::to_string(width) + " (valid range [2,16])") {}
};

// --- tensor_core ---

class ShapeMismatch : public Error {
public:
  explicit ShapeMismatch(const std::string& msg) : Error("shape mismatch: " + msg) {}
};

class AllMaskedRow : public Error {
public:
  explicit AllMaskedRow(std::size_t row)
      : Error("softmax row " + std::to_string(row) + " is fully masked") {}
};

class TargetOutOfRange : public Error {
public:
  TargetOutOfRange(std::size_t row, long target)
      : Error("cross-entropy target " + std::to_string(target) + " out of range at row " +
              std::to_string(row)) {}
};

class NonScalarRoot : public Error {
public:
  NonScalarRoot() : Error("backward() requires a scalar root") {}
};

class MissingGrad : public Error {
public:
  explicit MissingGrad(const std::string& name) : Error("parameter has no gradient: " + name) {}
};

class BadMagic : public Error {
public:
  BadMagic() : Error("checkpoint magic mismatch") {}
};

class VersionMismatch : public Error {
public:
  explicit VersionMismatch(std::uint32_t got)
      : Error("checkpoint version mismatch: " + std::to_string(got)) {}
};

class CorruptTensor : public Error {
public:
  explicit CorruptTensor(const std::string& name) : Error("corrupt checkpoint tensor: " + name) {}
};

// --- qformer ---

class TextTooLong : public Error {
public:
  TextTooLong(std::size_t len, std::size_t max_len)
      : Error("text length " + std::to_string(len) + " exceeds max " + std::to_string(max_len)) {}
};

class VocabOverflow : public Error {
public:
  explicit VocabOverflow(long id) : Error("token id out of vocabulary: " + std::to_string(id)) {}
};

class EmptyGraph : public Error {
public:
  EmptyGraph() : Error("graph has no nodes") {}
};

// --- objectives ---

class DuplicateDesignInBatch : public Error {
public:
  explicit DuplicateDesignInBatch(const std::string& id)
      : Error("duplicate design in batch: " + id) {}
};

class NumericError : public Error {
public:
  explicit NumericError(long step_)
      : Error("non-finite loss at step " + std::to_string(step_)), step(step_) {}
  long step;
};

// --- retrieval / stage2 ---

class FingerprintMismatch : public Error {
public:
  FingerprintMismatch(const std::string& want, const std::string& got)
      : Error("checkpoint fingerprint mismatch: index built with " + want + ", queried with " + got) {}
};

class EmptyCorpus : public Error {
public:
  EmptyCorpus() : Error("corpus has no records") {}
};

class ZeroGroundTruth : public Error {
public:
  explicit ZeroGroundTruth(const std::string& design_id)
      : Error("ground-truth metric is zero for design " + design_id) {}
};

}  // namespace bridges
