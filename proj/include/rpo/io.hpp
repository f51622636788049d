#pragma once

#include "rpo/solvers.hpp"
#include "rpo/trcomp.hpp"

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace rpo::io {

// Shortest decimal form that round-trips.
inline std::string fmt(double v)
{
    char buf[32];
    for (int prec = 15; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

inline std::ofstream open_out(const std::filesystem::path& path)
{
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    return out;
}

inline std::ifstream open_in(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    return in;
}

// "rows cols" header then row-major values.
inline void write_matrix(const std::filesystem::path& path, const Matrix& A)
{
    auto out = open_out(path);
    out << A.rows() << ' ' << A.cols() << '\n';
    for (Eigen::Index i = 0; i < A.rows(); ++i) {
        for (Eigen::Index j = 0; j < A.cols(); ++j) out << (j ? " " : "") << fmt(A(i, j));
        out << '\n';
    }
}

inline Matrix read_matrix(const std::filesystem::path& path)
{
    auto in = open_in(path);
    long rows = -1, cols = -1;
    if (!(in >> rows >> cols) || rows < 0 || cols < 0) throw Error(path.string() + ": bad matrix header");
    Matrix A(rows, cols);
    for (long i = 0; i < rows; ++i)
        for (long j = 0; j < cols; ++j) {
            std::string tok;
            if (!(in >> tok)) throw Error(path.string() + ": expected " + std::to_string(rows * cols) + " values");
            std::size_t used = 0;
            double v = 0;
            try {
                v = std::stod(tok, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != tok.size() || !std::isfinite(v)) throw Error(path.string() + ": invalid value '" + tok + "'");
            A(i, j) = v;
        }
    std::string extra;
    if (in >> extra) throw Error(path.string() + ": trailing data after matrix");
    return A;
}

// JSON header line {"dims":[...],"count":N[,"ranks":[...]]} then "i1 ... id value" lines, 1-based.
inline void write_samples(const std::filesystem::path& path, const tr::SamplingSet& s,
                          const std::vector<int>& ranks = {})
{
    auto out = open_out(path);
    nlohmann::json h;
    h["dims"] = s.dims;
    if (!ranks.empty()) h["ranks"] = ranks;
    h["count"] = s.size();
    out << h.dump() << '\n';
    for (long k = 0; k < s.size(); ++k) {
        for (int i : s.idx[k]) out << (i + 1) << ' ';
        out << fmt(s.values(k)) << '\n';
    }
}

struct SampleFile {
    tr::SamplingSet set;
    std::vector<int> ranks;
};

inline SampleFile read_samples(const std::filesystem::path& path)
{
    auto in = open_in(path);
    std::string line;
    if (!std::getline(in, line)) throw Error(path.string() + ": missing header");
    nlohmann::json h;
    try {
        h = nlohmann::json::parse(line);
    } catch (const std::exception& e) {
        throw Error(path.string() + ": bad header: " + e.what());
    }
    if (!h.contains("dims") || !h.contains("count")) throw Error(path.string() + ": header needs dims and count");
    const auto dims = h["dims"].get<std::vector<int>>();
    const long count = h["count"].get<long>();
    std::vector<tr::Index> idx;
    std::vector<double> vals;
    for (long k = 0; k < count; ++k) {
        tr::Index i(dims.size());
        for (auto& v : i) {
            if (!(in >> v)) throw Error(path.string() + ": truncated sample list");
            --v;
        }
        double val;
        if (!(in >> val)) throw Error(path.string() + ": truncated sample list");
        idx.push_back(std::move(i));
        vals.push_back(val);
    }
    SampleFile f{tr::make_sampling_set(dims, std::move(idx), std::move(vals)), {}};
    if (h.contains("ranks")) f.ranks = h["ranks"].get<std::vector<int>>();
    return f;
}

// Columns: iter,time_s,cost,gnorm,stepsize,<extras>.
inline void write_trace(const std::filesystem::path& path, const RunReport& rep, bool timing)
{
    auto out = open_out(path);
    out << "iter,time_s,cost,gnorm,stepsize";
    for (const auto& n : rep.extra_names) out << ',' << n;
    out << '\n';
    for (const auto& r : rep.trace) {
        out << r.iter << ',' << (timing ? fmt(r.time_s) : "0") << ',' << fmt(r.cost) << ',' << fmt(r.gnorm) << ','
            << fmt(r.stepsize);
        for (double e : r.extras) out << ',' << fmt(e);
        out << '\n';
    }
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j)
{
    auto out = open_out(path);
    out << j.dump(2) << '\n';
}

inline nlohmann::json read_json(const std::filesystem::path& path)
{
    auto in = open_in(path);
    try {
        return nlohmann::json::parse(in);
    } catch (const std::exception& e) {
        throw Error(path.string() + ": " + e.what());
    }
}

inline std::string slurp(const std::filesystem::path& path)
{
    auto in = open_in(path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace rpo::io
