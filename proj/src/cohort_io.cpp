#include "tforge/cohort_io.hpp"

#include <openssl/evp.h>

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

using nlohmann::json;

namespace tforge {

std::string sha256_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (!ctx) throw std::runtime_error("EVP_MD_CTX_new failed");
    if (EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx, bytes.data(), bytes.size()) != 1 ||
        EVP_DigestFinal_ex(ctx, digest, &len) != 1) {
        EVP_MD_CTX_free(ctx);
        throw std::runtime_error("sha256 digest failed");
    }
    EVP_MD_CTX_free(ctx);
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xf]);
    }
    return out;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << bytes;
    if (!out) throw std::runtime_error("write failed: " + path);
}

static json patient_to_json(const PatientRecord& p) {
    json events = json::array();
    for (const auto& ev : p.events) {
        events.push_back({{"kind", ev.symbol.kind},
                          {"ordinal", ev.symbol.ordinal},
                          {"day", ev.day}});
    }
    json j{{"id", p.id},
           {"label", p.label},
           {"window_days", p.window_days},
           {"events", std::move(events)}};
    if (p.onset_day.has_value())
        j["onset_day"] = *p.onset_day;
    else
        j["onset_day"] = nullptr;
    return j;
}

std::string cohort_to_jsonl(const Cohort& cohort) {
    std::string out;
    for (const auto& p : cohort.patients) {
        out += patient_to_json(p).dump();
        out += '\n';
    }
    return out;
}

void save_cohort(const Cohort& cohort, const std::string& path) {
    write_file(path, cohort_to_jsonl(cohort));
}

static double require_number(const json& j, const char* field, size_t line) {
    if (!j.contains(field) || !j[field].is_number())
        throw std::runtime_error("line " + std::to_string(line) +
                                 ": missing or non-numeric field '" + field + "'");
    return j[field].get<double>();
}

static PatientRecord parse_patient_line(const std::string& line, size_t lineno) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::parse_error& e) {
        throw std::runtime_error("line " + std::to_string(lineno) +
                                 ": malformed JSON (" + std::string(e.what()) + ")");
    }
    if (!j.is_object())
        throw std::runtime_error("line " + std::to_string(lineno) + ": not a JSON object");
    PatientRecord p;
    if (!j.contains("id") || !j["id"].is_string())
        throw std::runtime_error("line " + std::to_string(lineno) +
                                 ": missing or non-string field 'id'");
    p.id = j["id"].get<std::string>();
    p.label = static_cast<int>(require_number(j, "label", lineno));
    p.window_days = require_number(j, "window_days", lineno);
    if (j.contains("onset_day") && !j["onset_day"].is_null())
        p.onset_day = require_number(j, "onset_day", lineno);
    if (!j.contains("events") || !j["events"].is_array())
        throw std::runtime_error("line " + std::to_string(lineno) +
                                 ": missing or non-array field 'events'");
    for (const auto& e : j["events"]) {
        if (!e.is_object() || !e.contains("kind") || !e["kind"].is_string())
            throw std::runtime_error("line " + std::to_string(lineno) +
                                     ": event missing string field 'kind'");
        EventInstance ev;
        ev.symbol.kind = e["kind"].get<std::string>();
        ev.symbol.ordinal = static_cast<int>(require_number(e, "ordinal", lineno));
        ev.day = require_number(e, "day", lineno);
        p.events.push_back(std::move(ev));
    }
    return p;
}

Cohort parse_cohort_jsonl(const std::string& text,
                          std::vector<LoadWarning>* warnings) {
    Cohort cohort;
    std::istringstream in(text);
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        cohort.patients.push_back(parse_patient_line(line, lineno));
    }
    rebuild_vocabulary(cohort);

    auto violations = validate_cohort(cohort);
    if (!violations.empty()) {
        std::string msg = "cohort failed validation:";
        for (const auto& v : violations)
            msg += "\n  [" + v.patient_id + "] " + v.path + ": " + v.message;
        throw std::runtime_error(msg);
    }

    if (warnings) {
        // Events after the recorded onset are legal input but worth flagging.
        for (const auto& p : cohort.patients) {
            if (!p.onset_day.has_value()) continue;
            for (const auto& ev : p.events) {
                if (ev.day > *p.onset_day)
                    warnings->push_back(
                        {p.id, "event " + ev.symbol.render() + " occurs after onset_day"});
            }
        }
    }
    return cohort;
}

Cohort load_cohort(const std::string& path, std::vector<LoadWarning>* warnings) {
    return parse_cohort_jsonl(read_file(path), warnings);
}

std::string cohort_sha256(const Cohort& cohort) {
    return sha256_hex(cohort_to_jsonl(cohort));
}

}  // namespace tforge
