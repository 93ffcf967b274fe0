#pragma once

#include <stdexcept>
#include <string>

namespace epimob {

// Malformed or out-of-range input. `field` carries a JSON-pointer-like path
// when the error comes from document validation ("/policies/0/days").
class InvalidInput : public std::invalid_argument {
public:
    explicit InvalidInput(const std::string& what, std::string field = {})
        : std::invalid_argument(what), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

class NotFound : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A persisted record failed its length or checksum verification.
class IntegrityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Work request exceeds the configured users x days x runs budget.
class CapacityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace epimob
