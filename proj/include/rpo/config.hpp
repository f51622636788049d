#pragma once

#include "rpo/linalg.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <json.hpp>

#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace rpo {

using Schema = std::map<std::string, std::set<std::string>>;

// Sectioned key = value configuration.
class Config {
public:
    Config() = default;

    static Config parse(const std::string& text)
    {
        Config c;
        std::istringstream in(text);
        try {
            boost::property_tree::ini_parser::read_ini(in, c.pt_);
        } catch (const boost::property_tree::ini_parser_error& e) {
            throw Error(std::string("config: ") + e.message() + " at line " + std::to_string(e.line()));
        }
        return c;
    }

    static Config load(const std::string& path)
    {
        Config c;
        try {
            boost::property_tree::ini_parser::read_ini(path, c.pt_);
        } catch (const boost::property_tree::ini_parser_error& e) {
            throw Error("config " + path + ": " + e.message() + " at line " + std::to_string(e.line()));
        }
        return c;
    }

    void validate(const Schema& schema) const
    {
        for (const auto& [section, body] : pt_) {
            auto it = schema.find(section);
            if (body.empty() && !body.data().empty())
                throw Error("config: key '" + section + "' must be inside a section");
            if (it == schema.end()) throw Error("config: unknown section [" + section + "]");
            for (const auto& kv : body)
                if (!it->second.count(kv.first))
                    throw Error("config: unknown key [" + section + "]." + kv.first);
        }
    }

    bool has(const std::string& section, const std::string& key) const
    {
        return bool(pt_.get_child_optional(path(section, key)));
    }

    std::string get_string(const std::string& section, const std::string& key, const std::string& def) const
    {
        auto v = pt_.get_optional<std::string>(path(section, key));
        return v ? trim(*v) : def;
    }

    double get_double(const std::string& section, const std::string& key, double def) const
    {
        if (!has(section, key)) return def;
        return parse_double(section, key, get_string(section, key, ""));
    }

    long get_long(const std::string& section, const std::string& key, long def) const
    {
        if (!has(section, key)) return def;
        return parse_long(section, key, get_string(section, key, ""));
    }

    bool get_bool(const std::string& section, const std::string& key, bool def) const
    {
        if (!has(section, key)) return def;
        const std::string s = get_string(section, key, "");
        if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
        if (s == "false" || s == "0" || s == "no" || s == "off") return false;
        throw Error("config: [" + section + "]." + key + " must be a boolean");
    }

    std::vector<std::string> get_list(const std::string& section, const std::string& key,
                                      const std::vector<std::string>& def) const
    {
        if (!has(section, key)) return def;
        std::vector<std::string> out;
        std::stringstream ss(get_string(section, key, ""));
        std::string item;
        while (std::getline(ss, item, ',')) {
            item = trim(item);
            if (item.empty()) throw Error("config: [" + section + "]." + key + " has an empty list item");
            out.push_back(item);
        }
        if (out.empty()) throw Error("config: [" + section + "]." + key + " must not be empty");
        return out;
    }

    std::vector<double> get_doubles(const std::string& section, const std::string& key,
                                    const std::vector<double>& def) const
    {
        if (!has(section, key)) return def;
        std::vector<double> out;
        for (const auto& s : get_list(section, key, {})) out.push_back(parse_double(section, key, s));
        return out;
    }

    std::vector<int> get_ints(const std::string& section, const std::string& key, const std::vector<int>& def) const
    {
        if (!has(section, key)) return def;
        std::vector<int> out;
        for (const auto& s : get_list(section, key, {})) out.push_back(int(parse_long(section, key, s)));
        return out;
    }

    void set(const std::string& section, const std::string& key, const std::string& value)
    {
        pt_.put(path(section, key), value);
    }

    nlohmann::json echo() const
    {
        nlohmann::json j = nlohmann::json::object();
        for (const auto& [section, body] : pt_)
            for (const auto& kv : body) j[section][kv.first] = trim(kv.second.data());
        return j;
    }

private:
    static boost::property_tree::ptree::path_type path(const std::string& section, const std::string& key)
    {
        return boost::property_tree::ptree::path_type(section + '\x1f' + key, '\x1f');
    }

    static std::string trim(const std::string& s)
    {
        const auto b = s.find_first_not_of(" \t\r\n");
        if (b == std::string::npos) return {};
        const auto e = s.find_last_not_of(" \t\r\n");
        return s.substr(b, e - b + 1);
    }

    static double parse_double(const std::string& section, const std::string& key, const std::string& s)
    {
        try {
            std::size_t used = 0;
            double v;
            const auto slash = s.find('/');
            if (slash != std::string::npos) {
                const double num = std::stod(s.substr(0, slash));
                std::size_t u2 = 0;
                const std::string den_s = s.substr(slash + 1);
                const double den = std::stod(den_s, &u2);
                if (u2 != den_s.size()) throw std::invalid_argument(s);
                v = num / den;
                used = s.size();
            } else {
                v = std::stod(s, &used);
            }
            if (used == s.size() && std::isfinite(v)) return v;
        } catch (const std::exception&) {
        }
        throw Error("config: [" + section + "]." + key + " must be a number, got '" + s + "'");
    }

    static long parse_long(const std::string& section, const std::string& key, const std::string& s)
    {
        try {
            std::size_t used = 0;
            const long v = std::stol(s, &used);
            if (used == s.size()) return v;
        } catch (const std::exception&) {
        }
        throw Error("config: [" + section + "]." + key + " must be an integer, got '" + s + "'");
    }

    boost::property_tree::ptree pt_;
};

}  // namespace rpo
