#pragma once

// Append-only record stream produced by a simulation run: one JSON object
// per line, keys in fixed insertion order so identical runs serialize to
// identical bytes.

#include <fstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace sos {

using Record = nlohmann::ordered_json;

struct LogError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

class EventLog {
public:
    void append(Record rec) { records_.push_back(std::move(rec)); }

    const std::vector<Record>& records() const { return records_; }
    std::size_t size() const { return records_.size(); }
    const Record& at(std::size_t i) const { return records_.at(i); }

    std::string serialize() const {
        std::string out;
        for (const auto& r : records_) {
            out += r.dump();
            out.push_back('\n');
        }
        return out;
    }

    static EventLog parse(std::string_view text) {
        EventLog log;
        std::size_t lineno = 0;
        std::size_t pos = 0;
        while (pos < text.size()) {
            auto nl = text.find('\n', pos);
            if (nl == std::string_view::npos) nl = text.size();
            const std::string_view line = text.substr(pos, nl - pos);
            pos = nl + 1;
            ++lineno;
            if (line.empty()) continue;
            Record rec = Record::parse(line, nullptr, false);
            if (rec.is_discarded()) {
                throw LogError("event log line " + std::to_string(lineno) + ": invalid record");
            }
            log.append(std::move(rec));
        }
        return log;
    }

    void write_file(const std::string& path) const {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw LogError(path + ": cannot open for writing");
        out << serialize();
        if (!out.flush()) throw LogError(path + ": write failed");
    }

    static EventLog from_file(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw LogError(path + ": cannot open event log");
        std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        return parse(text);
    }

private:
    std::vector<Record> records_;
};

}  // namespace sos
