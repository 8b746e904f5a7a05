#pragma once

#include <stdexcept>
#include <string>

namespace proplab {

// Exit-code mapping used by the CLI: config/validation -> 1, I/O -> 2,
// numerical failure -> 3.
struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct validation_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct io_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct numeric_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Judge endpoint failures, kept separate so annotation can degrade per-row
// instead of aborting a batch.
struct judge_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct judge_parse_error : judge_error {
    using judge_error::judge_error;
};

struct judge_range_error : judge_error {
    using judge_error::judge_error;
};

struct judge_transport_error : judge_error {
    using judge_error::judge_error;
};

}  // namespace proplab
