#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace vap {

struct Error : std::runtime_error {
    Error(std::string kind, const std::string& msg)
        : std::runtime_error(kind + ": " + msg), kind(std::move(kind)) {}
    std::string kind;
};

enum class InvalidActionReason {
    empty_pick,
    not_top,
    full_destination,
    wrong_level,
    same_column,
};

inline const char* to_string(InvalidActionReason r) {
    switch (r) {
        case InvalidActionReason::empty_pick: return "empty-pick";
        case InvalidActionReason::not_top: return "not-top";
        case InvalidActionReason::full_destination: return "full-destination";
        case InvalidActionReason::wrong_level: return "wrong-level";
        case InvalidActionReason::same_column: return "same-column";
    }
    return "unknown";
}

struct InvalidAction : Error {
    InvalidAction(InvalidActionReason reason, const std::string& msg)
        : Error("InvalidAction", std::string(to_string(reason)) + ", " + msg), reason(reason) {}
    InvalidActionReason reason;
};

struct ShapeError : Error {
    explicit ShapeError(const std::string& msg) : Error("ShapeError", msg) {}
};

struct FormatError : Error {
    FormatError(const std::string& msg, std::uint64_t offset)
        : Error("FormatError", msg + " (offset " + std::to_string(offset) + ")"),
          offset(offset) {}
    std::uint64_t offset;
};

struct DivergenceError : Error {
    explicit DivergenceError(const std::string& msg) : Error("DivergenceError", msg) {}
};

struct EmptyResult : Error {
    explicit EmptyResult(const std::string& msg) : Error("EmptyResult", msg) {}
};

struct NoSimilarPairs : Error {
    explicit NoSimilarPairs(const std::string& msg) : Error("NoSimilarPairs", msg) {}
};

struct NoActionPairs : Error {
    explicit NoActionPairs(const std::string& msg) : Error("NoActionPairs", msg) {}
};

struct UnknownAction : Error {
    explicit UnknownAction(const std::string& msg) : Error("UnknownAction", msg) {}
};

struct DegenerateDataset : Error {
    explicit DegenerateDataset(const std::string& msg) : Error("DegenerateDataset", msg) {}
};

struct EmptyIndex : Error {
    explicit EmptyIndex(const std::string& msg) : Error("EmptyIndex", msg) {}
};

struct NoPath : Error {
    explicit NoPath(const std::string& msg) : Error("NoPath", msg) {}
};

struct UnknownNode : Error {
    explicit UnknownNode(const std::string& msg) : Error("UnknownNode", msg) {}
};

struct MissingLabels : Error {
    explicit MissingLabels(const std::string& msg) : Error("MissingLabels", msg) {}
};

struct NoCandidateActions : Error {
    explicit NoCandidateActions(const std::string& msg) : Error("NoCandidateActions", msg) {}
};

}  // namespace vap
