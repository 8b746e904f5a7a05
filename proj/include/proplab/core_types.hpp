#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "proplab/errors.hpp"

namespace proplab {

// 1-based list position. Kept as a plain int wrapped where it matters;
// functions taking a rank document the 1-based convention.
struct Rank {
    int value = 1;
    friend bool operator==(const Rank&, const Rank&) = default;
};

// Row-major grid; columns * rows = page size.
struct GridLayout {
    int columns = 4;
    int rows = 3;

    int page_size() const { return columns * rows; }
    friend bool operator==(const GridLayout&, const GridLayout&) = default;
};

// 0-based cell coordinates.
struct GridCell {
    int row = 0;
    int column = 0;
    friend bool operator==(const GridCell&, const GridCell&) = default;
};

// Integer judge score in [0, 100].
inline constexpr int kScoreMin = 0;
inline constexpr int kScoreMax = 100;

struct ScoreBucket {
    std::string label;
    int lo = 0;
    int hi = 0;  // inclusive
    friend bool operator==(const ScoreBucket&, const ScoreBucket&) = default;
};

// One logged row. judge_score is absent until annotated; true_relevance is
// present only in simulated logs.
struct Impression {
    std::string query_id;
    std::string item_id;
    int rank = 1;
    GridCell cell;
    std::optional<int> judge_score;
    bool clicked = false;
    bool booked = false;
    std::optional<double> true_relevance;
};

GridCell rank_to_cell(int rank, const GridLayout& layout);
int cell_to_rank(const GridCell& cell, const GridLayout& layout);

// Throws config_error on overlapping buckets. Returns nullptr when the score
// falls outside every bucket (sparse low scores are dropped from analyses).
const ScoreBucket* bucket_of(int score, const std::vector<ScoreBucket>& buckets);

void validate_buckets(const std::vector<ScoreBucket>& buckets);

// Parses "81-100,61-80,41-60" into buckets labeled by their range strings.
std::vector<ScoreBucket> parse_buckets(const std::string& spec);

// The three buckets used for the score-stability diagnostic.
std::vector<ScoreBucket> default_buckets();

// JSONL wire format, one object per line, field names exactly:
// query_id, item_id, rank, row, col, judge_score, clicked, booked,
// true_relevance (last two value fields may be null).
std::string impression_to_json_line(const Impression& imp);
Impression impression_from_json_line(const std::string& line);

void write_impressions(std::ostream& os, const std::vector<Impression>& log);
std::vector<Impression> read_impressions(std::istream& is);
std::vector<Impression> read_impressions_file(const std::string& path);
void write_impressions_file(const std::string& path,
                            const std::vector<Impression>& log);

// Schema validation: booked => clicked, cell consistent with rank under the
// layout, distinct ranks within each query. Throws validation_error listing
// the first offending row.
void validate_log(const std::vector<Impression>& log, const GridLayout& layout);

// Smallest layout consistent with the row/col fields of a log.
GridLayout infer_layout(const std::vector<Impression>& log);

}  // namespace proplab
