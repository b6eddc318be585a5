#include "multicam/evalio/report.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "multicam/common/error.hpp"

namespace multicam {

ReportFormat report_format_from_string(std::string_view s) {
  if (s == "csv") return ReportFormat::kCsv;
  if (s == "md" || s == "markdown") return ReportFormat::kMarkdown;
  if (s == "svg") return ReportFormat::kSvg;
  throw Error(ErrorCode::kInvalidConfig, "unknown report format '" + std::string(s) + "'");
}

namespace {

std::string num(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  std::string s = buf;
  if (s[0] == '-' && s.find_first_of("123456789") == std::string::npos) s.erase(0, 1);
  return s;
}

void write_file(const std::filesystem::path &path, const std::string &text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw Error(ErrorCode::kIoError, "write failed for '" + path.string() + "'");
}

}  // namespace

std::string cameras_csv(std::span<const EvaluationReport> reports) {
  std::ostringstream os;
  os << "method,camera,samples,e_trans_mm,e_rot_deg\n";
  for (const auto &r : reports) {
    for (const auto &c : r.cameras)
      os << r.method << ',' << c.camera_id << ',' << c.samples << ',' << num(c.translation_mm) << ','
         << num(c.rotation_deg) << '\n';
    if (r.camera_mean)
      os << r.method << ",mean," << r.camera_mean->samples << ',' << num(r.camera_mean->translation_mm)
         << ',' << num(r.camera_mean->rotation_deg) << '\n';
  }
  return os.str();
}

std::string objects_csv(std::span<const EvaluationReport> reports) {
  std::ostringstream os;
  os << "method,object,symmetric,samples,add_auc,e_trans_mm,e_rot_deg\n";
  for (const auto &r : reports) {
    auto row = [&](const ObjectErrorRow &o) {
      os << r.method << ',' << o.name << ',' << (o.symmetric ? 1 : 0) << ',' << o.samples << ','
         << num(o.auc) << ',' << num(o.translation_mm) << ',' << (o.rotation_deg ? num(*o.rotation_deg) : "")
         << '\n';
    };
    for (const auto &o : r.objects) row(o);
    if (r.object_mean) row(*r.object_mean);
  }
  return os.str();
}

std::string drift_csv(std::span<const EvaluationReport> reports) {
  std::ostringstream os;
  os << "method,t,raw_mm,corrected_mm,keyframe,hmd_keyframe\n";
  for (const auto &r : reports)
    for (const auto &d : r.drift)
      os << r.method << ',' << num(d.t) << ',' << num(1000.0 * d.raw) << ',' << num(1000.0 * d.corrected)
         << ',' << (d.keyframe ? 1 : 0) << ',' << (d.hmd_keyframe ? 1 : 0) << '\n';
  return os.str();
}

std::string summary_csv(std::span<const EvaluationReport> reports) {
  std::ostringstream os;
  os << "method,frames,keyframes,no_keyframes,e_trans_mm,e_rot_deg\n";
  for (const auto &r : reports) {
    os << r.method << ',' << r.frame_count << ',' << r.keyframe_count << ',' << (r.no_keyframes ? 1 : 0) << ',';
    if (r.camera_mean)
      os << num(r.camera_mean->translation_mm) << ',' << num(r.camera_mean->rotation_deg);
    else
      os << ',';
    os << '\n';
  }
  return os.str();
}

std::string runtime_csv(std::span<const EvaluationReport> reports) {
  std::ostringstream os;
  os << "method,stage,samples,mean_ms\n";
  for (const auto &r : reports)
    for (const auto &x : r.runtime) os << r.method << ',' << x.stage << ',' << x.samples << ',' << num(x.mean_ms, 4) << '\n';
  return os.str();
}

std::string report_markdown(std::span<const EvaluationReport> reports, const EmitOptions &opt) {
  std::ostringstream os;
  os << "## Camera pose error at keyframes\n\n";
  os << "| Method | Keyframes | e_trans (mm) | e_rot (deg) |";
  if (opt.with_timing) os << " Runtime (ms) |";
  os << "\n|---|---|---|---|";
  if (opt.with_timing) os << "---|";
  os << '\n';
  for (const auto &r : reports) {
    os << "| " << r.method << " | " << r.keyframe_count << " | ";
    if (r.camera_mean)
      os << num(r.camera_mean->translation_mm, 2) << " | " << num(r.camera_mean->rotation_deg, 2) << " |";
    else
      os << "- | - |";
    if (opt.with_timing) {
      double total = 0.0;
      for (const auto &x : r.runtime)
        if (x.stage != "ingest") total += x.mean_ms;
      os << ' ' << num(total, 2) << " |";
    }
    os << '\n';
  }
  for (const auto &r : reports) {
    os << "\n## Object pose error (" << r.method << ")\n\n";
    os << "| Object | ADD(S) AUC | e_trans (mm) | e_rot (deg) |\n|---|---|---|---|\n";
    auto row = [&](const ObjectErrorRow &o) {
      os << "| " << o.name << (o.symmetric ? "*" : "") << " | " << num(100.0 * o.auc, 2) << " | "
         << num(o.translation_mm, 2) << " | " << (o.rotation_deg ? num(*o.rotation_deg, 2) : std::string("-"))
         << " |\n";
    };
    for (const auto &o : r.objects) row(o);
    if (r.object_mean) row(*r.object_mean);
  }
  os << "\nSymmetric objects are marked with *; their rotation error is not evaluated. AUC in percent.\n";
  return os.str();
}

std::string drift_svg(const EvaluationReport &r) {
  const double W = 800, H = 400, L = 70, R = 20, T = 30, B = 50;
  double t_max = 0.0, e_max = 0.0;
  for (const auto &d : r.drift) {
    t_max = std::max(t_max, d.t);
    e_max = std::max({e_max, 1000.0 * d.raw, 1000.0 * d.corrected});
  }
  if (t_max <= 0) t_max = 1.0;
  if (e_max <= 0) e_max = 1.0;
  auto X = [&](double t) { return L + (W - L - R) * t / t_max; };
  auto Y = [&](double e) { return H - B - (H - T - B) * e / e_max; };
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 "
     << W << ' ' << H << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double t = t_max * i / 4, e = e_max * i / 4;
    os << "<text x=\"" << num(X(t), 1) << "\" y=\"" << H - B + 18 << "\" font-size=\"11\" text-anchor=\"middle\">"
       << num(t, 1) << "</text>\n";
    os << "<text x=\"" << L - 6 << "\" y=\"" << num(Y(e) + 4, 1) << "\" font-size=\"11\" text-anchor=\"end\">"
       << num(e, 1) << "</text>\n";
  }
  os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 10 << "\" font-size=\"13\" text-anchor=\"middle\">time (s)</text>\n";
  os << "<text x=\"18\" y=\"" << (T + H - B) / 2 << "\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
     << (T + H - B) / 2 << ")\">drift error (mm)</text>\n";
  auto line = [&](bool corrected, const char *colour, const char *id) {
    os << "<polyline id=\"" << id << "\" fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < r.drift.size(); ++i) {
      const auto &d = r.drift[i];
      os << (i ? " " : "") << num(X(d.t), 2) << ',' << num(Y(1000.0 * (corrected ? d.corrected : d.raw)), 2);
    }
    os << "\"/>\n";
  };
  line(false, "#d62728", "raw");
  line(true, "#1f77b4", "corrected");
  os << "<text x=\"" << W - R - 150 << "\" y=\"" << T + 5 << "\" font-size=\"12\" fill=\"#d62728\">raw SLAM</text>\n";
  os << "<text x=\"" << W - R - 150 << "\" y=\"" << T + 22 << "\" font-size=\"12\" fill=\"#1f77b4\">keyframe corrected</text>\n";
  os << "</svg>\n";
  return os.str();
}

std::vector<std::filesystem::path> emit_report(std::span<const EvaluationReport> reports, ReportFormat format,
                                               const std::filesystem::path &dir, const EmitOptions &opt) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIoError, "cannot create '" + dir.string() + "': " + ec.message());
  std::vector<std::filesystem::path> out;
  auto put = [&](const std::string &name, const std::string &text) {
    write_file(dir / name, text);
    out.push_back(dir / name);
  };
  switch (format) {
    case ReportFormat::kCsv:
      put("cameras.csv", cameras_csv(reports));
      put("objects.csv", objects_csv(reports));
      put("drift.csv", drift_csv(reports));
      put("summary.csv", summary_csv(reports));
      if (opt.with_timing) put("runtime.csv", runtime_csv(reports));
      break;
    case ReportFormat::kMarkdown:
      put("report.md", report_markdown(reports, opt));
      break;
    case ReportFormat::kSvg:
      for (const auto &r : reports)
        put(reports.size() == 1 ? std::string("drift.svg") : "drift_" + r.method + ".svg", drift_svg(r));
      break;
  }
  return out;
}

}  // namespace multicam
