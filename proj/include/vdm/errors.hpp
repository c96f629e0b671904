#pragma once

#include <stdexcept>
#include <string>

namespace vdm {

// Error taxonomy. Every precondition violation maps to one of these so tests
// can assert on the category, not on message text.

struct DimensionError : std::invalid_argument {
    explicit DimensionError(const std::string& msg) : std::invalid_argument("dimension: " + msg) {}
};

struct DomainError : std::domain_error {
    explicit DomainError(const std::string& msg) : std::domain_error("domain: " + msg) {}
};

struct OrderingError : std::invalid_argument {
    explicit OrderingError(const std::string& msg) : std::invalid_argument("ordering: " + msg) {}
};

struct ContractError : std::logic_error {
    explicit ContractError(const std::string& msg) : std::logic_error("contract: " + msg) {}
};

struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error("numeric: " + msg) {}
};

struct SingularityError : std::domain_error {
    explicit SingularityError(const std::string& msg) : std::domain_error("endpoint singularity: " + msg) {}
};

struct InfeasibleError : std::invalid_argument {
    explicit InfeasibleError(const std::string& msg) : std::invalid_argument("infeasible: " + msg) {}
};

struct LookupError : std::invalid_argument {
    explicit LookupError(const std::string& msg) : std::invalid_argument("lookup: " + msg) {}
};

struct ConfigError : std::invalid_argument {
    explicit ConfigError(const std::string& msg) : std::invalid_argument("config: " + msg) {}
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error("io: " + msg) {}
};

}  // namespace vdm
