#include "proplab/core_types.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

namespace proplab {

GridCell rank_to_cell(int rank, const GridLayout& layout) {
    if (rank < 1 || rank > layout.page_size()) {
        throw validation_error("rank " + std::to_string(rank) +
                               " out of range for " +
                               std::to_string(layout.columns) + "x" +
                               std::to_string(layout.rows) + " layout");
    }
    return GridCell{(rank - 1) / layout.columns, (rank - 1) % layout.columns};
}

int cell_to_rank(const GridCell& cell, const GridLayout& layout) {
    if (cell.row < 0 || cell.row >= layout.rows || cell.column < 0 ||
        cell.column >= layout.columns) {
        throw validation_error("cell out of range for layout");
    }
    return cell.row * layout.columns + cell.column + 1;
}

void validate_buckets(const std::vector<ScoreBucket>& buckets) {
    for (const auto& b : buckets) {
        if (b.lo > b.hi) {
            throw config_error("bucket '" + b.label + "' has lo > hi");
        }
    }
    for (size_t i = 0; i < buckets.size(); ++i) {
        for (size_t j = i + 1; j < buckets.size(); ++j) {
            if (buckets[i].lo <= buckets[j].hi && buckets[j].lo <= buckets[i].hi) {
                throw config_error("buckets '" + buckets[i].label + "' and '" +
                                   buckets[j].label + "' overlap");
            }
        }
    }
}

const ScoreBucket* bucket_of(int score, const std::vector<ScoreBucket>& buckets) {
    validate_buckets(buckets);
    for (const auto& b : buckets) {
        if (score >= b.lo && score <= b.hi) return &b;
    }
    return nullptr;
}

std::vector<ScoreBucket> parse_buckets(const std::string& spec) {
    std::vector<ScoreBucket> out;
    std::stringstream ss(spec);
    std::string part;
    while (std::getline(ss, part, ',')) {
        auto dash = part.find('-');
        if (dash == std::string::npos) {
            throw config_error("bad bucket range '" + part + "', expected lo-hi");
        }
        ScoreBucket b;
        b.label = part;
        try {
            b.lo = std::stoi(part.substr(0, dash));
            b.hi = std::stoi(part.substr(dash + 1));
        } catch (const std::exception&) {
            throw config_error("bad bucket range '" + part + "'");
        }
        out.push_back(std::move(b));
    }
    if (out.empty()) throw config_error("empty bucket spec");
    validate_buckets(out);
    return out;
}

std::vector<ScoreBucket> default_buckets() {
    return {{"Excellent", 81, 100}, {"Good", 61, 80}, {"Fair", 41, 60}};
}

namespace {

void append_double(std::string& out, double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    out.append(buf, res.ptr);
}

void append_json_string(std::string& out, const std::string& s) {
    out += '"';
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            default: out += c;
        }
    }
    out += '"';
}

}  // namespace

std::string impression_to_json_line(const Impression& imp) {
    std::string out;
    out.reserve(160);
    out += "{\"query_id\":";
    append_json_string(out, imp.query_id);
    out += ",\"item_id\":";
    append_json_string(out, imp.item_id);
    out += ",\"rank\":" + std::to_string(imp.rank);
    out += ",\"row\":" + std::to_string(imp.cell.row);
    out += ",\"col\":" + std::to_string(imp.cell.column);
    out += ",\"judge_score\":";
    out += imp.judge_score ? std::to_string(*imp.judge_score) : "null";
    out += ",\"clicked\":";
    out += imp.clicked ? "true" : "false";
    out += ",\"booked\":";
    out += imp.booked ? "true" : "false";
    out += ",\"true_relevance\":";
    if (imp.true_relevance) {
        append_double(out, *imp.true_relevance);
    } else {
        out += "null";
    }
    out += '}';
    return out;
}

Impression impression_from_json_line(const std::string& line) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw io_error(std::string("bad JSONL record: ") + e.what());
    }
    Impression imp;
    try {
        imp.query_id = j.at("query_id").get<std::string>();
        imp.item_id = j.at("item_id").get<std::string>();
        imp.rank = j.at("rank").get<int>();
        imp.cell.row = j.at("row").get<int>();
        imp.cell.column = j.at("col").get<int>();
        if (!j.at("judge_score").is_null()) {
            imp.judge_score = j.at("judge_score").get<int>();
        }
        imp.clicked = j.at("clicked").get<bool>();
        imp.booked = j.at("booked").get<bool>();
        if (!j.at("true_relevance").is_null()) {
            imp.true_relevance = j.at("true_relevance").get<double>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw io_error(std::string("bad JSONL record: ") + e.what());
    }
    return imp;
}

void write_impressions(std::ostream& os, const std::vector<Impression>& log) {
    for (const auto& imp : log) {
        os << impression_to_json_line(imp) << '\n';
    }
}

std::vector<Impression> read_impressions(std::istream& is) {
    std::vector<Impression> out;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        out.push_back(impression_from_json_line(line));
    }
    return out;
}

std::vector<Impression> read_impressions_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw io_error("cannot open log file: " + path);
    return read_impressions(is);
}

void write_impressions_file(const std::string& path,
                            const std::vector<Impression>& log) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw io_error("cannot write log file: " + path);
    write_impressions(os, log);
}

void validate_log(const std::vector<Impression>& log, const GridLayout& layout) {
    std::unordered_map<std::string, std::unordered_set<int>> ranks_by_query;
    for (size_t i = 0; i < log.size(); ++i) {
        const auto& imp = log[i];
        if (imp.booked && !imp.clicked) {
            throw validation_error("row " + std::to_string(i) +
                                   ": booked without click");
        }
        if (rank_to_cell(imp.rank, layout) != imp.cell) {
            throw validation_error("row " + std::to_string(i) +
                                   ": cell inconsistent with rank");
        }
        if (imp.judge_score &&
            (*imp.judge_score < kScoreMin || *imp.judge_score > kScoreMax)) {
            throw validation_error("row " + std::to_string(i) +
                                   ": judge score out of range");
        }
        if (imp.true_relevance &&
            (*imp.true_relevance < 0.0 || *imp.true_relevance > 1.0)) {
            throw validation_error("row " + std::to_string(i) +
                                   ": true_relevance out of [0,1]");
        }
        if (!ranks_by_query[imp.query_id].insert(imp.rank).second) {
            throw validation_error("row " + std::to_string(i) +
                                   ": duplicate rank within query " +
                                   imp.query_id);
        }
    }
}

GridLayout infer_layout(const std::vector<Impression>& log) {
    int max_row = 0, max_col = 0;
    for (const auto& imp : log) {
        max_row = std::max(max_row, imp.cell.row);
        max_col = std::max(max_col, imp.cell.column);
    }
    return GridLayout{max_col + 1, max_row + 1};
}

}  // namespace proplab
