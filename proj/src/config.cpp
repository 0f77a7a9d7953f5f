#include "config.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

namespace hymlab {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

bool parse_number(const std::string& t, double& out) {
    char* end = nullptr;
    out = std::strtod(t.c_str(), &end);
    return end && *end == '\0' && !t.empty();
}

ConfigValue parse_scalar(const std::string& tok, int line, const std::string& origin) {
    ConfigValue v;
    v.line = line;
    if (tok == "true" || tok == "false") {
        v.kind = ConfigValue::Kind::Bool;
        v.b = (tok == "true");
        return v;
    }
    if (tok.size() >= 2 && tok.front() == '"' && tok.back() == '"') {
        v.kind = ConfigValue::Kind::String;
        v.str = tok.substr(1, tok.size() - 2);
        return v;
    }
    double num;
    if (parse_number(tok, num)) {
        v.kind = ConfigValue::Kind::Number;
        v.num = num;
        return v;
    }
    // bare word (identifiers, complex literals)
    if (tok.empty())
        throw ConfigError(origin + ":" + std::to_string(line) + ": empty value");
    v.kind = ConfigValue::Kind::String;
    v.str = tok;
    return v;
}

std::vector<std::string> split_csv(const std::string& body) {
    std::vector<std::string> out;
    std::string cur;
    bool in_str = false;
    for (char c : body) {
        if (c == '"') in_str = !in_str;
        if (c == ',' && !in_str) {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    const std::string last = trim(cur);
    if (!last.empty()) out.push_back(last);
    return out;
}

} // namespace

complexd parse_complex(const std::string& raw) {
    std::string t = trim(raw);
    if (t.empty()) throw ConfigError("empty complex literal");
    t.erase(std::remove(t.begin(), t.end(), ' '), t.end());

    if (t.back() != 'i') {
        double re;
        if (!parse_number(t, re))
            throw ConfigError("bad complex literal '" + raw + "'");
        return {re, 0.0};
    }
    t.pop_back(); // drop the i
    // find the split between real and imaginary parts: the last +/- that is
    // not an exponent sign
    int split = -1;
    for (int i = static_cast<int>(t.size()) - 1; i > 0; --i) {
        if ((t[i] == '+' || t[i] == '-') &&
            !(t[i - 1] == 'e' || t[i - 1] == 'E')) {
            split = i;
            break;
        }
    }
    std::string res = (split > 0) ? t.substr(0, split) : "";
    std::string ims = (split > 0) ? t.substr(split) : t;
    if (ims.empty() || ims == "+") ims = "1";
    else if (ims == "-") ims = "-1";
    double re = 0.0, im;
    if (!res.empty() && !parse_number(res, re))
        throw ConfigError("bad complex literal '" + raw + "'");
    if (!parse_number(ims, im))
        throw ConfigError("bad complex literal '" + raw + "'");
    return {re, im};
}

Config Config::parse_text(const std::string& text, const std::string& origin) {
    Config cfg;
    cfg.origin_ = origin;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError(origin + ":" + std::to_string(lineno) +
                                  ": malformed section header '" + line + "'");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(lineno) +
                              ": expected key = value, got '" + line + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
        ConfigValue v;
        if (!val.empty() && val.front() == '[') {
            if (val.back() != ']')
                throw ConfigError(origin + ":" + std::to_string(lineno) +
                                  ": unterminated list for field '" + key + "'");
            v.kind = ConfigValue::Kind::List;
            v.line = lineno;
            for (const auto& item : split_csv(val.substr(1, val.size() - 2)))
                v.list.push_back(parse_scalar(item, lineno, origin));
        } else {
            v = parse_scalar(val, lineno, origin);
        }
        cfg.sections_[section][key] = std::move(v);
    }
    return cfg;
}

namespace {

ConfigValue from_json(const nlohmann::json& j) {
    ConfigValue v;
    if (j.is_boolean()) {
        v.kind = ConfigValue::Kind::Bool;
        v.b = j.get<bool>();
    } else if (j.is_number()) {
        v.kind = ConfigValue::Kind::Number;
        v.num = j.get<double>();
    } else if (j.is_string()) {
        v.kind = ConfigValue::Kind::String;
        v.str = j.get<std::string>();
    } else if (j.is_array()) {
        v.kind = ConfigValue::Kind::List;
        for (const auto& item : j) v.list.push_back(from_json(item));
    } else {
        throw ConfigError("unsupported JSON value type in config");
    }
    return v;
}

} // namespace

Config Config::parse_json_text(const std::string& text, const std::string& origin) {
    Config cfg;
    cfg.origin_ = origin;
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(origin + ": " + e.what());
    }
    if (!j.is_object()) throw ConfigError(origin + ": top level must be an object");
    for (const auto& [sec, body] : j.items()) {
        if (!body.is_object())
            throw ConfigError(origin + ": section '" + sec + "' must be an object");
        for (const auto& [key, val] : body.items())
            cfg.sections_[sec][key] = from_json(val);
    }
    return cfg;
}

Config Config::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    const bool json = path.size() > 5 && path.substr(path.size() - 5) == ".json";
    return json ? parse_json_text(buf.str(), path) : parse_text(buf.str(), path);
}

const ConfigValue* Config::find(const std::string& sec, const std::string& key) const {
    auto s = sections_.find(sec);
    if (s == sections_.end()) return nullptr;
    auto k = s->second.find(key);
    if (k == s->second.end()) return nullptr;
    return &k->second;
}

void Config::fail(const std::string& sec, const std::string& key,
                  const std::string& what, int line) const {
    std::string where = origin_;
    if (line > 0) where += ":" + std::to_string(line);
    throw ConfigError(where + ": field [" + sec + "]." + key + ": " + what);
}

bool Config::has(const std::string& sec, const std::string& key) const {
    return find(sec, key) != nullptr;
}

double Config::get_number(const std::string& sec, const std::string& key,
                          double dflt) const {
    const ConfigValue* v = find(sec, key);
    if (!v) return dflt;
    if (v->kind != ConfigValue::Kind::Number)
        fail(sec, key, "expected a number", v->line);
    return v->num;
}

long long Config::get_int(const std::string& sec, const std::string& key,
                          long long dflt) const {
    const ConfigValue* v = find(sec, key);
    if (!v) return dflt;
    if (v->kind != ConfigValue::Kind::Number ||
        v->num != std::floor(v->num))
        fail(sec, key, "expected an integer", v->line);
    return static_cast<long long>(v->num);
}

bool Config::get_bool(const std::string& sec, const std::string& key, bool dflt) const {
    const ConfigValue* v = find(sec, key);
    if (!v) return dflt;
    if (v->kind != ConfigValue::Kind::Bool)
        fail(sec, key, "expected true/false", v->line);
    return v->b;
}

std::string Config::get_string(const std::string& sec, const std::string& key,
                               const std::string& dflt) const {
    const ConfigValue* v = find(sec, key);
    if (!v) return dflt;
    if (v->kind != ConfigValue::Kind::String)
        fail(sec, key, "expected a string", v->line);
    return v->str;
}

std::vector<double> Config::get_number_list(const std::string& sec,
                                            const std::string& key) const {
    const ConfigValue* v = find(sec, key);
    if (!v) return {};
    if (v->kind != ConfigValue::Kind::List)
        fail(sec, key, "expected a list", v->line);
    std::vector<double> out;
    for (const auto& item : v->list) {
        if (item.kind != ConfigValue::Kind::Number)
            fail(sec, key, "expected a list of numbers", item.line);
        out.push_back(item.num);
    }
    return out;
}

std::vector<complexd> Config::get_complex_list(const std::string& sec,
                                               const std::string& key) const {
    const ConfigValue* v = find(sec, key);
    if (!v) return {};
    if (v->kind != ConfigValue::Kind::List)
        fail(sec, key, "expected a list", v->line);
    std::vector<complexd> out;
    for (const auto& item : v->list) {
        try {
            if (item.kind == ConfigValue::Kind::Number)
                out.emplace_back(item.num, 0.0);
            else if (item.kind == ConfigValue::Kind::String)
                out.push_back(parse_complex(item.str));
            else
                fail(sec, key, "expected complex literals", item.line);
        } catch (const ConfigError& e) {
            fail(sec, key, e.what(), item.line);
        }
    }
    return out;
}

} // namespace hymlab
