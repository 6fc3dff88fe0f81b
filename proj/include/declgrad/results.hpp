#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "declgrad/train.hpp"

namespace declgrad::results {

// 9 significant digits, locale-independent.
inline std::string fmt_real(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", x);
    return buf;
}

struct ResultsRow {
    std::size_t run;
    std::size_t iteration;
    double loss;
    double cos_sim_mean;
    double cos_sim_min;
    double descent_fraction;
    std::string grad_mode;
    std::string problem;
    std::uint64_t seed;
};

inline const char* kCsvHeader =
    "run,iteration,loss,cos_sim_mean,cos_sim_min,descent_fraction,grad_mode,problem,seed";

inline std::string to_csv(const std::vector<train::CurveRecord>& records,
                          const train::ExperimentConfig& cfg) {
    std::string out(kCsvHeader);
    out += '\n';
    for (const auto& r : records) {
        out += std::to_string(r.run) + ',' + std::to_string(r.iteration) + ',' + fmt_real(r.loss) +
               ',' + fmt_real(r.cos_sim_mean) + ',' + fmt_real(r.cos_sim_min) + ',' +
               fmt_real(r.descent_fraction) + ',' + train::to_string(cfg.grad_mode) + ',' +
               train::to_string(cfg.problem) + ',' + std::to_string(cfg.seed) + '\n';
    }
    return out;
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << content;
}

struct CsvParseError : std::runtime_error {
    CsvParseError(const std::string& msg, std::size_t row)
        : std::runtime_error(msg + " (row " + std::to_string(row) + ")"), row_number(row) {}
    std::size_t row_number;
};

// Minimal RFC-4180 reader for the fields cmd_train writes; none of them need
// quoting but quoted fields are accepted.
inline std::vector<std::string> split_csv_line(const std::string& line, std::size_t row) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char ch = line[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += ch;
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    if (quoted) throw CsvParseError("unterminated quote", row);
    fields.push_back(cur);
    return fields;
}

inline std::vector<ResultsRow> parse_results_csv(std::istream& in) {
    std::string line;
    std::size_t row = 0;
    if (!std::getline(in, line)) throw CsvParseError("empty file", 0);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kCsvHeader) throw CsvParseError("unexpected header", 1);
    std::vector<ResultsRow> rows;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;  // trailing comment from an aborted run
        auto f = split_csv_line(line, row + 1);
        if (f.size() != 9) throw CsvParseError("expected 9 fields, got " + std::to_string(f.size()), row + 1);
        try {
            rows.push_back({std::stoull(f[0]), std::stoull(f[1]), std::stod(f[2]), std::stod(f[3]),
                            std::stod(f[4]), std::stod(f[5]), f[6], f[7], std::stoull(f[8])});
        } catch (const std::exception&) {
            throw CsvParseError("malformed numeric field", row + 1);
        }
    }
    if (rows.empty()) throw CsvParseError("no data rows", row + 1);
    return rows;
}

inline std::vector<ResultsRow> read_results_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path);
    return parse_results_csv(in);
}

// ---------------------------------------------------------------------------
// Hand-emitted SVG: loss curves on top, cosine similarity below with a zero
// reference line. Per-run strokes are light, the per-mode mean is dark.
// ---------------------------------------------------------------------------

namespace detail {

struct Series {
    std::vector<double> values;  // indexed by iteration
};

struct ModeData {
    std::string mode;
    std::vector<Series> loss_runs;
    std::vector<Series> cos_runs;
    Series loss_mean;
    Series cos_mean;
};

inline std::vector<ModeData> group_by_mode(const std::vector<std::vector<ResultsRow>>& files) {
    std::vector<ModeData> modes;
    for (const auto& rows : files) {
        std::size_t max_run = 0, max_it = 0;
        for (const auto& r : rows) {
            max_run = std::max(max_run, r.run);
            max_it = std::max(max_it, r.iteration);
        }
        ModeData md;
        md.mode = rows.front().grad_mode;
        md.loss_runs.assign(max_run + 1, Series{std::vector<double>(max_it + 1, 0.0)});
        md.cos_runs.assign(max_run + 1, Series{std::vector<double>(max_it + 1, 0.0)});
        for (const auto& r : rows) {
            md.loss_runs[r.run].values[r.iteration] = r.loss;
            md.cos_runs[r.run].values[r.iteration] = r.cos_sim_mean;
        }
        md.loss_mean.values.assign(max_it + 1, 0.0);
        md.cos_mean.values.assign(max_it + 1, 0.0);
        for (std::size_t it = 0; it <= max_it; ++it) {
            for (std::size_t run = 0; run <= max_run; ++run) {
                md.loss_mean.values[it] += md.loss_runs[run].values[it];
                md.cos_mean.values[it] += md.cos_runs[run].values[it];
            }
            md.loss_mean.values[it] /= static_cast<double>(max_run + 1);
            md.cos_mean.values[it] /= static_cast<double>(max_run + 1);
        }
        modes.push_back(std::move(md));
    }
    return modes;
}

inline std::string svg_real(double x) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", x);
    return buf;
}

}  // namespace detail

inline std::string render_curves_svg(const std::vector<std::vector<ResultsRow>>& files,
                                     bool log_loss = false) {
    if (files.empty()) throw std::runtime_error("render_curves_svg: no input");
    auto modes = detail::group_by_mode(files);

    const double W = 800, H = 600, ML = 70, MR = 20, MT = 40, MB = 50;
    const double total_h = 2 * H + 40;

    std::size_t iters = 0;
    double loss_lo = std::numeric_limits<double>::infinity(), loss_hi = -loss_lo;
    for (const auto& md : modes) {
        for (const auto& s : md.loss_runs) {
            iters = std::max(iters, s.values.size());
            for (double v : s.values) {
                double t = log_loss ? std::log10(std::max(v, 1e-300)) : v;
                loss_lo = std::min(loss_lo, t);
                loss_hi = std::max(loss_hi, t);
            }
        }
    }
    if (loss_hi <= loss_lo) loss_hi = loss_lo + 1.0;
    double cos_lo = -1.0, cos_hi = 1.0;

    auto x_of = [&](std::size_t it) {
        return ML + (W - ML - MR) * static_cast<double>(it) /
                        static_cast<double>(std::max<std::size_t>(iters - 1, 1));
    };
    auto y_loss = [&](double v) {
        double t = log_loss ? std::log10(std::max(v, 1e-300)) : v;
        return MT + (H - MT - MB) * (1.0 - (t - loss_lo) / (loss_hi - loss_lo));
    };
    auto y_cos = [&](double v, double y0) {
        return y0 + MT + (H - MT - MB) * (1.0 - (v - cos_lo) / (cos_hi - cos_lo));
    };

    const char* dark[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};
    const char* light[] = {"#9ecae9", "#f4a9a9", "#a8dcA8", "#cbb7e2"};

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << total_h
        << "\" viewBox=\"0 0 " << W << " " << total_h << "\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

    auto polyline = [&](const std::vector<double>& vals, auto ymap, const char* color,
                        const char* width, const char* opacity) {
        svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"" << width
            << "\" stroke-opacity=\"" << opacity << "\" points=\"";
        for (std::size_t it = 0; it < vals.size(); ++it) {
            if (it) svg << ' ';
            svg << detail::svg_real(x_of(it)) << ',' << detail::svg_real(ymap(vals[it]));
        }
        svg << "\"/>\n";
    };

    auto axes = [&](double y0, const std::string& title, const std::string& ylabel) {
        svg << "<rect x=\"" << ML << "\" y=\"" << y0 + MT << "\" width=\"" << W - ML - MR
            << "\" height=\"" << H - MT - MB
            << "\" fill=\"none\" stroke=\"black\" stroke-width=\"1\"/>\n";
        svg << "<text x=\"" << W / 2 << "\" y=\"" << y0 + 22
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">" << title
            << "</text>\n";
        svg << "<text x=\"" << W / 2 << "\" y=\"" << y0 + H - 12
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">iteration"
            << "</text>\n";
        svg << "<text x=\"18\" y=\"" << y0 + H / 2
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" transform=\""
            << "rotate(-90 18 " << y0 + H / 2 << ")\">" << ylabel << "</text>\n";
    };

    axes(0, "training loss", log_loss ? "log10 loss" : "loss");
    for (std::size_t mi = 0; mi < modes.size(); ++mi) {
        for (const auto& s : modes[mi].loss_runs)
            polyline(s.values, y_loss, light[mi % 4], "1", "0.8");
        polyline(modes[mi].loss_mean.values, y_loss, dark[mi % 4], "2.5", "1");
        svg << "<text x=\"" << W - MR - 10 << "\" y=\"" << MT + 22 + 20 * static_cast<double>(mi)
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"13\" fill=\""
            << dark[mi % 4] << "\">" << modes[mi].mode << "</text>\n";
    }

    double y0 = H + 40;
    axes(y0, "gradient cosine similarity", "cos similarity");
    double zero_y = y_cos(0.0, y0);
    svg << "<line x1=\"" << ML << "\" y1=\"" << detail::svg_real(zero_y) << "\" x2=\"" << W - MR
        << "\" y2=\"" << detail::svg_real(zero_y)
        << "\" stroke=\"gray\" stroke-width=\"1\" stroke-dasharray=\"4 4\"/>\n";
    for (std::size_t mi = 0; mi < modes.size(); ++mi) {
        for (const auto& s : modes[mi].cos_runs)
            polyline(s.values, [&](double v) { return y_cos(v, y0); }, light[mi % 4], "1", "0.8");
        polyline(modes[mi].cos_mean.values, [&](double v) { return y_cos(v, y0); }, dark[mi % 4],
                 "2.5", "1");
    }

    svg << "</svg>\n";
    return svg.str();
}

}  // namespace declgrad::results
