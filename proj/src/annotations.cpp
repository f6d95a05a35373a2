#include <charconv>
#include <fstream>
#include <string>
#include <vector>

#include "apnea/errors.hpp"
#include "apnea/ingest.hpp"

namespace apnea::ingest {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        if (comma == std::string::npos) {
            fields.push_back(trim(line.substr(start)));
            break;
        }
        fields.push_back(trim(line.substr(start, comma - start)));
        start = comma + 1;
    }
    return fields;
}

double parse_number(const std::string& field, const std::string& what, std::size_t line_no) {
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc{} || ptr != field.data() + field.size())
        throw DataError("line " + std::to_string(line_no) + ": non-numeric " + what + " '" + field +
                        "'");
    return value;
}

}  // namespace

std::vector<AnnotationEvent> parse_annotations(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open annotation file: " + path.string());

    std::string line;
    if (!std::getline(in, line) || trim(line) != "record_id,onset_s,duration_s,label")
        throw DataError(path.string() + ": missing header 'record_id,onset_s,duration_s,label'");

    std::vector<AnnotationEvent> events;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != 4)
            throw DataError("line " + std::to_string(line_no) + ": expected 4 fields, got " +
                            std::to_string(fields.size()));
        AnnotationEvent ev;
        ev.record_id = fields[0];
        ev.onset_s = parse_number(fields[1], "onset_s", line_no);
        ev.duration_s = parse_number(fields[2], "duration_s", line_no);
        ev.label = fields[3];
        if (ev.onset_s < 0.0)
            throw DataError("line " + std::to_string(line_no) + ": negative onset_s");
        if (ev.duration_s <= 0.0)
            throw DataError("line " + std::to_string(line_no) + ": duration_s must be positive");
        events.push_back(std::move(ev));
    }
    return events;
}

DatasetSplit parse_split(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open split file: " + path.string());

    std::string line;
    if (!std::getline(in, line) || trim(line) != "record_id,role")
        throw DataError(path.string() + ": missing header 'record_id,role'");

    DatasetSplit split;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != 2)
            throw DataError("line " + std::to_string(line_no) + ": expected 2 fields");
        const auto& id = fields[0];
        const auto& role = fields[1];
        const bool in_train =
            std::find(split.train_record_ids.begin(), split.train_record_ids.end(), id) !=
            split.train_record_ids.end();
        const bool in_test =
            std::find(split.test_record_ids.begin(), split.test_record_ids.end(), id) !=
            split.test_record_ids.end();
        if (in_train || in_test)
            throw DataError("line " + std::to_string(line_no) + ": record '" + id +
                            "' listed more than once");
        if (role == "train")
            split.train_record_ids.push_back(id);
        else if (role == "test")
            split.test_record_ids.push_back(id);
        else
            throw DataError("line " + std::to_string(line_no) + ": role must be train or test, got '" +
                            role + "'");
    }
    return split;
}

}  // namespace apnea::ingest
