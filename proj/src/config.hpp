// config.hpp -- flat scenario configuration: [section] / key = value text files
// with a JSON mirror.  Parse errors carry line and field information.

#pragma once

#include "errors.hpp"

#include <complex>
#include <map>
#include <string>
#include <vector>

namespace hymlab {

using complexd = std::complex<double>;

struct ConfigValue {
    enum class Kind { Bool, Number, String, List };
    Kind kind = Kind::String;
    bool b = false;
    double num = 0.0;
    std::string str;
    std::vector<ConfigValue> list;
    int line = 0;
};

class Config {
  public:
    static Config parse_file(const std::string& path);
    static Config parse_text(const std::string& text, const std::string& origin);
    static Config parse_json_text(const std::string& text, const std::string& origin);

    bool has(const std::string& sec, const std::string& key) const;

    double get_number(const std::string& sec, const std::string& key, double dflt) const;
    long long get_int(const std::string& sec, const std::string& key, long long dflt) const;
    bool get_bool(const std::string& sec, const std::string& key, bool dflt) const;
    std::string get_string(const std::string& sec, const std::string& key,
                           const std::string& dflt) const;
    std::vector<double> get_number_list(const std::string& sec,
                                        const std::string& key) const;
    std::vector<complexd> get_complex_list(const std::string& sec,
                                           const std::string& key) const;

    const std::string& origin() const { return origin_; }

  private:
    const ConfigValue* find(const std::string& sec, const std::string& key) const;
    [[noreturn]] void fail(const std::string& sec, const std::string& key,
                           const std::string& what, int line = 0) const;
    std::map<std::string, std::map<std::string, ConfigValue>> sections_;
    std::string origin_;
};

// complex literals: "0.25", "-0.3i", "0.1+0.2i", "i"
complexd parse_complex(const std::string& text);

} // namespace hymlab
