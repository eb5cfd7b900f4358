#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace iwsi {

// Stable CLI exit codes. 1 is reserved for uncaught/unknown failures.
enum class ExitCode : int {
    ok = 0,
    input_schema = 2,
    backend = 3,
    precondition = 4,
    internal = 5,
};

class Error : public std::runtime_error {
public:
    Error(ExitCode code, std::string message)
        : std::runtime_error(std::move(message)), code_(code) {}
    ExitCode exit_code() const { return code_; }

private:
    ExitCode code_;
};

class IoError : public Error {
public:
    explicit IoError(const std::string& msg) : Error(ExitCode::input_schema, msg) {}
};

class SchemaError : public Error {
public:
    SchemaError(const std::string& msg, std::size_t line = 0, std::string field = "")
        : Error(ExitCode::input_schema, format(msg, line, field)), line_(line), field_(std::move(field)) {}
    std::size_t line() const { return line_; }
    const std::string& field() const { return field_; }

private:
    static std::string format(const std::string& msg, std::size_t line, const std::string& field) {
        std::string out = msg;
        if (line > 0) out += " (line " + std::to_string(line) + ")";
        if (!field.empty()) out += " [field: " + field + "]";
        return out;
    }
    std::size_t line_;
    std::string field_;
};

class DuplicateIdError : public Error {
public:
    DuplicateIdError(const std::string& id, std::size_t line)
        : Error(ExitCode::input_schema,
                "duplicate question id \"" + id + "\" (line " + std::to_string(line) + ")"),
          id_(id) {}
    const std::string& id() const { return id_; }

private:
    std::string id_;
};

class RemoteError : public Error {
public:
    explicit RemoteError(const std::string& msg) : Error(ExitCode::backend, msg) {}
    RemoteError(const std::string& msg, std::vector<std::size_t> failed_indices)
        : Error(ExitCode::backend, msg), failed_(std::move(failed_indices)) {}
    const std::vector<std::size_t>& failed_indices() const { return failed_; }

private:
    std::vector<std::size_t> failed_;
};

class EmptyCompletionError : public Error {
public:
    explicit EmptyCompletionError(const std::string& msg) : Error(ExitCode::backend, msg) {}
};

class TokenizationError : public Error {
public:
    explicit TokenizationError(const std::string& msg) : Error(ExitCode::precondition, msg) {}
};

class ZeroLossError : public Error {
public:
    explicit ZeroLossError(const std::string& msg) : Error(ExitCode::precondition, msg) {}
};

class NoParseableAnswerError : public Error {
public:
    explicit NoParseableAnswerError(const std::string& question_id)
        : Error(ExitCode::precondition, "no parseable answer for question \"" + question_id + "\""),
          id_(question_id) {}
    const std::string& question_id() const { return id_; }

private:
    std::string id_;
};

class EmptyValidSetError : public Error {
public:
    EmptyValidSetError() : Error(ExitCode::precondition, "valid set is empty") {}
};

class EmptyPoolError : public Error {
public:
    EmptyPoolError() : Error(ExitCode::precondition, "sample pool is empty") {}
};

class SizeExceedsPoolError : public Error {
public:
    SizeExceedsPoolError(std::size_t size, std::size_t pool)
        : Error(ExitCode::precondition,
                "subset size " + std::to_string(size) + " exceeds pool size " + std::to_string(pool)) {}
};

class MissingGoldError : public Error {
public:
    explicit MissingGoldError(const std::string& question_id)
        : Error(ExitCode::precondition, "no gold answer for question \"" + question_id + "\""),
          id_(question_id) {}
    const std::string& question_id() const { return id_; }

private:
    std::string id_;
};

} // namespace iwsi
