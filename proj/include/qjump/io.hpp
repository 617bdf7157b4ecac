#pragma once

// CSV and file plumbing. Every float is written with %.17g so a replayed run
// can compare outputs byte for byte.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "qjump/coupling.hpp"
#include "qjump/matrix.hpp"
#include "qjump/trajectory.hpp"

namespace qjump {

inline std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_text_file(const std::filesystem::path& p, const std::string& content) {
    std::ofstream f(p, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open for writing: " + p.string());
    f << content;
    f.flush();
    if (!f) throw std::runtime_error("write failed: " + p.string());
}

inline std::string read_text_file(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for reading: " + p.string());
    std::string s((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (f.bad()) throw std::runtime_error("read failed: " + p.string());
    return s;
}

namespace detail {
inline void append_mat2_cells(std::string& out, const Mat2& m) {
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 2; ++c) {
            out += ',';
            out += fmt17(m(r, c).real());
            out += ',';
            out += fmt17(m(r, c).imag());
        }
}
}  // namespace detail

inline std::string csv_trajectory(const TrajectoryPath& path) {
    std::string out = "t,re00,im00,re01,im01,re10,im10,re11,im11,jumps\n";
    for (std::size_t i = 0; i < path.grid.size(); ++i) {
        out += fmt17(path.grid[i]);
        detail::append_mat2_cells(out, path.states[i]);
        out += ',';
        out += std::to_string(path.counting[i]);
        out += '\n';
    }
    return out;
}

inline std::string csv_mean(const MeanPath& mp) {
    std::string out =
        "t,re00,im00,re01,im01,re10,im10,re11,im11,se00,se01,se10,se11\n";
    for (std::size_t i = 0; i < mp.grid.size(); ++i) {
        out += fmt17(mp.grid[i]);
        detail::append_mat2_cells(out, mp.mean[i]);
        for (int r = 0; r < 2; ++r)
            for (int c = 0; c < 2; ++c) {
                out += ',';
                out += fmt17(mp.stderr_entries[i](r, c).real());
            }
        out += '\n';
    }
    return out;
}

// Generic mean-with-stderr table for state sequences on a time grid (used for
// the discrete-chain ensemble, which has no counting column).
inline std::string csv_state_mean(const std::vector<double>& grid,
                                  const std::vector<Mat2>& mean,
                                  const std::vector<Mat2>& stderr_entries) {
    std::string out =
        "t,re00,im00,re01,im01,re10,im10,re11,im11,se00,se01,se10,se11\n";
    for (std::size_t i = 0; i < grid.size(); ++i) {
        out += fmt17(grid[i]);
        detail::append_mat2_cells(out, mean[i]);
        for (int r = 0; r < 2; ++r)
            for (int c = 0; c < 2; ++c) {
                out += ',';
                out += fmt17(stderr_entries[i](r, c).real());
            }
        out += '\n';
    }
    return out;
}

inline std::string csv_error_table(const ConvergenceReport& rep) {
    std::string out = "n,A,A_se,S,S_se,B,B_se,Z,Z_se,A_times_n\n";
    for (std::size_t g = 0; g < rep.rows.size(); ++g) {
        const auto& r = rep.rows[g];
        out += std::to_string(r.n);
        for (const MeanStderr* m : {&r.A, &r.S, &r.B, &r.Z}) {
            out += ',';
            out += fmt17(m->mean);
            out += ',';
            out += fmt17(m->stderr_mean);
        }
        out += ',';
        out += fmt17(rep.A_times_n[g]);
        out += '\n';
    }
    return out;
}

}  // namespace qjump
