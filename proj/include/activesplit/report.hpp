#pragma once

// Text tables and SVG charts rendered purely from a ResultTable's
// aggregates; nothing here refits a model.

#include <activesplit/harness.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace activesplit {

namespace detail {

inline std::string fixed(double v, int digits = 4) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(digits) << v;
    return os.str();
}

inline std::string pad(const std::string& s, std::size_t width, bool right = false) {
    if (s.size() >= width) return s;
    return right ? std::string(width - s.size(), ' ') + s : s + std::string(width - s.size(), ' ');
}

inline std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

inline std::string file_token(std::string s) {
    for (auto& c : s)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '.' && c != '-') c = '_';
    return s;
}

inline std::string model_colour(const std::string& model, std::size_t index) {
    static const std::map<std::string, std::string> fixed_colours{
        {"mlp", "#d62728"}, {"svr", "#1f77b4"}, {"rf", "#ff7f0e"}, {"ridge", "#2ca02c"}};
    static const char* extra[] = {"#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
    const auto base = model.substr(0, model.find('#'));
    if (model == base) {
        const auto it = fixed_colours.find(base);
        if (it != fixed_colours.end()) return it->second;
    }
    return extra[index % std::size(extra)];
}

/// Order of the overall-score panels: per gamma lmin then lsum, mse last.
inline std::vector<std::string> panel_order(const std::vector<std::string>& losses) {
    std::vector<std::string> out;
    for (const auto& l : losses)
        if (l != "mse") out.push_back(l);
    std::stable_sort(out.begin(), out.end(), [](const std::string& a, const std::string& b) {
        const double ga = std::stod(a.substr(a.find('@') + 1));
        const double gb = std::stod(b.substr(b.find('@') + 1));
        if (ga != gb) return ga < gb;
        return a.rfind("lmin", 0) == 0 && b.rfind("lsum", 0) == 0;
    });
    if (std::find(losses.begin(), losses.end(), "mse") != losses.end()) out.push_back("mse");
    return out;
}

inline std::vector<SplitInfo> splits_by_fraction(std::vector<SplitInfo> splits) {
    std::stable_sort(splits.begin(), splits.end(), [](const SplitInfo& a, const SplitInfo& b) { return a.fraction > b.fraction; });
    return splits;
}

inline std::vector<DatasetInfo> datasets_by_size(std::vector<DatasetInfo> ds) {
    std::stable_sort(ds.begin(), ds.end(), [](const DatasetInfo& a, const DatasetInfo& b) { return a.n < b.n; });
    return ds;
}

}  // namespace detail

/// Per-dataset loss tables (mean, SE, mean +/- 2SE, optimality) followed by
/// overall score tables, one per loss in panel order.
inline void write_report(std::ostream& out, const ResultTable& t) {
    for (const auto& d : t.datasets) {
        out << "== " << d.name << " (N=" << d.n << (d.target_id.empty() ? "" : ", " + d.target_id) << ")\n";
        for (const auto& s : t.splits) {
            for (const auto& l : t.losses) {
                const auto* cell = find_cell(t, d.name, s.label, l);
                if (!cell) continue;
                out << "-- " << s.label << "  " << l << '\n';
                out << detail::pad("model", 10) << detail::pad("mean", 10, true) << detail::pad("se", 10, true)
                    << detail::pad("mean-2se", 11, true) << detail::pad("mean+2se", 11, true) << detail::pad("p_opt", 8, true)
                    << '\n';
                for (const auto& m : cell->models)
                    out << detail::pad(m.model, 10) << detail::pad(detail::fixed(m.mean), 10, true)
                        << detail::pad(detail::fixed(m.se), 10, true) << detail::pad(detail::fixed(m.mean - 2 * m.se), 11, true)
                        << detail::pad(detail::fixed(m.mean + 2 * m.se), 11, true)
                        << detail::pad(detail::fixed(m.probability_optimal, 3), 8, true) << '\n';
            }
        }
        out << '\n';
    }

    out << "== overall scores (sum of optimality probabilities over " << t.datasets.size() << " datasets)\n";
    for (const auto& l : detail::panel_order(t.losses)) {
        out << "-- " << l << '\n' << detail::pad("split", 14);
        for (const auto& m : t.models) out << detail::pad(m, 9, true);
        out << detail::pad("total", 9, true) << '\n';
        for (const auto& s : detail::splits_by_fraction(t.splits)) {
            const auto row = std::find_if(t.scores.begin(), t.scores.end(),
                                          [&](const ScoreRow& r) { return r.split == s.label && r.loss == l; });
            if (row == t.scores.end()) continue;
            out << detail::pad(s.label, 14);
            double total = 0.0;
            for (const auto& [m, v] : row->scores) {
                out << detail::pad(detail::fixed(v, 3), 9, true);
                total += v;
            }
            out << detail::pad(detail::fixed(total, 3), 9, true) << '\n';
        }
    }
}

/// Minimal SVG canvas with a plotting area and linear axes.
class SvgChart {
public:
    SvgChart(double width, double height, std::string title) : width_(width), height_(height) {
        body_ << "<text x=\"" << width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
              << detail::xml_escape(title) << "</text>\n";
    }

    double left() const { return 70; }
    double right() const { return width_ - 150; }
    double top() const { return 40; }
    double bottom() const { return height_ - 90; }

    void set_y_range(double lo, double hi) {
        if (!(hi > lo)) hi = lo + 1.0;
        const double margin = 0.05 * (hi - lo);
        y_lo_ = lo - margin;
        y_hi_ = hi + margin;
    }

    double y(double v) const { return bottom() - (v - y_lo_) / (y_hi_ - y_lo_) * (bottom() - top()); }

    void axes(const std::string& y_label, const std::string& x_label) {
        body_ << "<g class=\"axes\" stroke=\"#000\" fill=\"none\">\n"
              << "<line x1=\"" << left() << "\" y1=\"" << bottom() << "\" x2=\"" << right() << "\" y2=\"" << bottom() << "\"/>\n"
              << "<line x1=\"" << left() << "\" y1=\"" << top() << "\" x2=\"" << left() << "\" y2=\"" << bottom() << "\"/>\n"
              << "</g>\n";
        for (int k = 0; k <= 5; ++k) {
            const double v = y_lo_ + (y_hi_ - y_lo_) * k / 5.0;
            body_ << "<g class=\"ytick\"><line x1=\"" << left() - 4 << "\" y1=\"" << y(v) << "\" x2=\"" << left() << "\" y2=\""
                  << y(v) << "\" stroke=\"#000\"/><text x=\"" << left() - 7 << "\" y=\"" << y(v) + 4
                  << "\" text-anchor=\"end\" font-size=\"10\">" << detail::fixed(v, 3) << "</text></g>\n";
        }
        body_ << "<text x=\"16\" y=\"" << (top() + bottom()) / 2 << "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
              << (top() + bottom()) / 2 << ")\">" << detail::xml_escape(y_label) << "</text>\n";
        body_ << "<text x=\"" << (left() + right()) / 2 << "\" y=\"" << height_ - 12 << "\" font-size=\"12\" text-anchor=\"middle\">"
              << detail::xml_escape(x_label) << "</text>\n";
    }

    void x_tick(double x, const std::string& label, bool rotate) {
        body_ << "<g class=\"xtick\"><line x1=\"" << x << "\" y1=\"" << bottom() << "\" x2=\"" << x << "\" y2=\"" << bottom() + 4
              << "\" stroke=\"#000\"/>";
        if (rotate)
            body_ << "<text x=\"" << x << "\" y=\"" << bottom() + 14 << "\" font-size=\"10\" text-anchor=\"end\" transform=\"rotate(-40 "
                  << x << ' ' << bottom() + 14 << ")\">";
        else
            body_ << "<text x=\"" << x << "\" y=\"" << bottom() + 16 << "\" font-size=\"10\" text-anchor=\"middle\">";
        body_ << detail::xml_escape(label) << "</text></g>\n";
    }

    void error_bar(double x, double mean, double half_width, const std::string& colour, const std::string& model) {
        body_ << "<g class=\"point\" data-model=\"" << detail::xml_escape(model) << "\" stroke=\"" << colour << "\">"
              << "<line x1=\"" << x << "\" y1=\"" << y(mean - half_width) << "\" x2=\"" << x << "\" y2=\"" << y(mean + half_width)
              << "\"/><circle cx=\"" << x << "\" cy=\"" << y(mean) << "\" r=\"3\" fill=\"" << colour << "\"/></g>\n";
    }

    void polyline(const std::vector<std::pair<double, double>>& pts, const std::string& colour, const std::string& model) {
        body_ << "<polyline class=\"series\" data-model=\"" << detail::xml_escape(model) << "\" fill=\"none\" stroke=\"" << colour
              << "\" stroke-width=\"2\" points=\"";
        for (const auto& [px, py] : pts) body_ << px << ',' << y(py) << ' ';
        body_ << "\"/>\n";
        for (const auto& [px, py] : pts)
            body_ << "<circle cx=\"" << px << "\" cy=\"" << y(py) << "\" r=\"3\" fill=\"" << colour << "\"/>\n";
    }

    void legend(const std::vector<std::string>& models) {
        for (std::size_t m = 0; m < models.size(); ++m) {
            const double ly = top() + 16.0 * static_cast<double>(m);
            body_ << "<g class=\"legend\"><rect x=\"" << right() + 20 << "\" y=\"" << ly << "\" width=\"10\" height=\"10\" fill=\""
                  << detail::model_colour(models[m], m) << "\"/><text x=\"" << right() + 36 << "\" y=\"" << ly + 9
                  << "\" font-size=\"11\">" << detail::xml_escape(models[m]) << "</text></g>\n";
        }
    }

    std::string str() const {
        std::ostringstream os;
        os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
           << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width_ << "\" height=\"" << height_ << "\" viewBox=\"0 0 "
           << width_ << ' ' << height_ << "\" font-family=\"sans-serif\">\n"
           << "<rect width=\"100%\" height=\"100%\" fill=\"#fff\"/>\n"
           << body_.str() << "</svg>\n";
        return os.str();
    }

private:
    double width_, height_;
    double y_lo_ = 0, y_hi_ = 1;
    std::ostringstream body_;
};

/// Mean loss per dataset (smallest first) and model with +/- 2SE bars.
inline std::string loss_chart_svg(const ResultTable& t, const std::string& split, const std::string& loss) {
    const auto datasets = detail::datasets_by_size(t.datasets);
    const double width = std::max(520.0, 220.0 + 60.0 * static_cast<double>(datasets.size()));
    SvgChart chart(width, 420, loss + " under " + split + " (mean +/- 2 SE)");
    double lo = INFINITY, hi = -INFINITY;
    for (const auto& d : datasets) {
        if (const auto* c = find_cell(t, d.name, split, loss))
            for (const auto& m : c->models) {
                lo = std::min(lo, m.mean - 2 * m.se);
                hi = std::max(hi, m.mean + 2 * m.se);
            }
    }
    if (!std::isfinite(lo)) lo = 0, hi = 1;
    chart.set_y_range(lo, hi);
    chart.axes(loss, "dataset (ordered by size)");
    const double slot = (chart.right() - chart.left()) / static_cast<double>(std::max<std::size_t>(1, datasets.size()));
    const auto n_models = static_cast<double>(t.models.size());
    for (std::size_t di = 0; di < datasets.size(); ++di) {
        const double centre = chart.left() + slot * (static_cast<double>(di) + 0.5);
        chart.x_tick(centre, datasets[di].name + " (" + std::to_string(datasets[di].n) + ")", true);
        const auto* c = find_cell(t, datasets[di].name, split, loss);
        if (!c) continue;
        for (std::size_t mi = 0; mi < t.models.size(); ++mi) {
            const auto it = std::find_if(c->models.begin(), c->models.end(), [&](const ModelAggregate& m) { return m.model == t.models[mi]; });
            if (it == c->models.end()) continue;
            const double x = centre + slot * 0.6 * ((static_cast<double>(mi) + 0.5) / n_models - 0.5);
            chart.error_bar(x, it->mean, 2 * it->se, detail::model_colour(t.models[mi], mi), t.models[mi]);
        }
    }
    chart.legend(t.models);
    return chart.str();
}

/// Overall score against the training fraction q (bootstrap plotted at 1).
/// k-fold plans are not on the q axis and are left out.
inline std::string score_chart_svg(const ResultTable& t, const std::string& loss) {
    std::vector<SplitInfo> points;
    for (const auto& s : detail::splits_by_fraction(t.splits))
        if (s.label.rfind("kfold", 0) != 0) points.push_back(s);
    std::reverse(points.begin(), points.end());  // x increases with q
    SvgChart chart(620, 420, "overall score, " + loss);
    chart.set_y_range(0.0, static_cast<double>(t.datasets.size()));
    chart.axes("sum of optimality probabilities", "training quantile q");
    const double span = chart.right() - chart.left();
    std::vector<double> xs;
    for (std::size_t k = 0; k < points.size(); ++k) {
        const double x = points.size() == 1 ? chart.left() + span / 2
                                            : chart.left() + 20 + (span - 40) * static_cast<double>(k) / static_cast<double>(points.size() - 1);
        xs.push_back(x);
        chart.x_tick(x, format_exact(points[k].fraction), false);
    }
    for (std::size_t mi = 0; mi < t.models.size(); ++mi) {
        std::vector<std::pair<double, double>> pts;
        for (std::size_t k = 0; k < points.size(); ++k) {
            const auto row = std::find_if(t.scores.begin(), t.scores.end(),
                                          [&](const ScoreRow& r) { return r.split == points[k].label && r.loss == loss; });
            if (row == t.scores.end()) continue;
            pts.emplace_back(xs[k], row->scores[mi].second);
        }
        chart.polyline(pts, detail::model_colour(t.models[mi], mi), t.models[mi]);
    }
    chart.legend(t.models);
    return chart.str();
}

/// Writes loss_<split>_<loss>.svg for every (split, loss) and
/// scores_<loss>.svg for every loss. Returns the files written.
inline std::vector<std::filesystem::path> write_plots(const ResultTable& t, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::vector<std::filesystem::path> written;
    auto emit = [&](const std::filesystem::path& p, const std::string& svg) {
        std::ofstream out(p, std::ios::binary);
        if (!out) throw Error("cannot write " + p.string());
        out << svg;
        written.push_back(p);
    };
    for (const auto& s : t.splits)
        for (const auto& l : t.losses)
            emit(dir / ("loss_" + detail::file_token(s.label) + "_" + detail::file_token(l) + ".svg"), loss_chart_svg(t, s.label, l));
    for (const auto& l : detail::panel_order(t.losses)) emit(dir / ("scores_" + detail::file_token(l) + ".svg"), score_chart_svg(t, l));
    return written;
}

}  // namespace activesplit
