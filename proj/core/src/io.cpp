#include "axle/io.hpp"

#include "axle/error.hpp"
#include "axle/ingest.hpp"

#include "json.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <tuple>

namespace axle::io {

namespace {

static_assert(std::endian::native == std::endian::little, "binary I/O assumes a little-endian host");

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

double parse_number(std::string_view text, const std::string& context) {
    const auto t = trim(text);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
    if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
        throw Error(ErrorKind::Io, context + ": '" + t + "' is not a number");
    return value;
}

std::vector<double> parse_list(std::string_view text, const std::string& context) {
    std::vector<double> out;
    std::size_t start = 0;
    const std::string t = trim(text);
    if (t.empty()) return out;
    while (true) {
        const auto comma = t.find(',', start);
        out.push_back(parse_number(std::string_view(t).substr(start, comma - start), context));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

struct DigestDeleter {
    void operator()(EVP_MD_CTX* ctx) const { EVP_MD_CTX_free(ctx); }
};

}  // namespace

void write_file_atomic(const fs::path& path, std::string_view content) {
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
        if (ec) throw Error(ErrorKind::Io, "cannot create directory " + path.parent_path().string() + ": " + ec.message());
    }
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorKind::Io, "cannot write " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw Error(ErrorKind::Io, "failed writing " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw Error(ErrorKind::Io, "cannot move " + tmp.string() + " into place: " + ec.message());
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string format_number(double value) {
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    if (ec != std::errc()) throw Error(ErrorKind::Io, "cannot format number");
    return {buf, ptr};
}

// ---------------------------------------------------------------- passages

void write_passage(const PassageRecord& passage, const fs::path& dir) {
    passage.validate();
    if (passage.id.empty() || passage.id.find_first_of("/\\") != std::string::npos)
        throw Error(ErrorKind::InvalidInput, "passage id '" + passage.id + "' cannot be used as a file name");

    std::string meta;
    meta += "id = " + passage.id + "\n";
    meta += "sample_rate = " + format_number(passage.sample_rate) + "\n";
    meta += "sensor_offsets = ";
    for (std::size_t i = 0; i < passage.sensor_offsets.size(); ++i)
        meta += (i ? ", " : "") + format_number(passage.sensor_offsets[i]);
    meta += "\n";
    meta += "wlm_spacing = " + format_number(passage.wlm_spacing) + "\n";
    meta += "wlm_spacing_uncertainty = " + format_number(passage.wlm_spacing_uncertainty) + "\n";

    std::string data;
    data.reserve(static_cast<std::size_t>(passage.n_samples()) * static_cast<std::size_t>(passage.n_sensors() + 2) * 12);
    for (Eigen::Index r = 0; r < passage.accel.rows(); ++r) {
        data += format_number(passage.wheel_load(r, 0));
        data += ' ';
        data += format_number(passage.wheel_load(r, 1));
        for (Eigen::Index c = 0; c < passage.accel.cols(); ++c) {
            data += ' ';
            data += format_number(passage.accel(r, c));
        }
        data += '\n';
    }
    write_file_atomic(dir / (passage.id + ".dat"), data);
    write_file_atomic(dir / (passage.id + ".meta"), meta);
}

PassageRecord read_passage(const fs::path& meta_path) {
    const std::string meta = read_file(meta_path);
    std::map<std::string, std::string> kv;
    std::istringstream lines(meta);
    std::string line;
    int line_no = 0;
    while (std::getline(lines, line)) {
        ++line_no;
        const auto t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw Error(ErrorKind::Io, meta_path.string() + ":" + std::to_string(line_no) + ": expected 'key = value'");
        kv[trim(std::string_view(t).substr(0, eq))] = trim(std::string_view(t).substr(eq + 1));
    }
    const auto get = [&](const std::string& key) -> const std::string& {
        const auto it = kv.find(key);
        if (it == kv.end()) throw Error(ErrorKind::Io, meta_path.string() + ": missing key '" + key + "'");
        return it->second;
    };

    PassageRecord p;
    p.id = get("id");
    const std::string ctx = meta_path.string();
    p.sample_rate = parse_number(get("sample_rate"), ctx + " sample_rate");
    p.sensor_offsets = parse_list(get("sensor_offsets"), ctx + " sensor_offsets");
    if (kv.contains("wlm_spacing")) p.wlm_spacing = parse_number(kv["wlm_spacing"], ctx + " wlm_spacing");
    if (kv.contains("wlm_spacing_uncertainty"))
        p.wlm_spacing_uncertainty = parse_number(kv["wlm_spacing_uncertainty"], ctx + " wlm_spacing_uncertainty");

    auto data_path = meta_path;
    data_path.replace_extension(".dat");
    const std::string data = read_file(data_path);
    const auto n_cols = static_cast<std::size_t>(p.sensor_offsets.size()) + 2;
    std::vector<double> values;
    std::size_t rows = 0;
    std::istringstream data_lines(data);
    line_no = 0;
    while (std::getline(data_lines, line)) {
        ++line_no;
        const auto t = trim(line);
        if (t.empty()) continue;
        std::size_t cols = 0;
        std::size_t pos = 0;
        while (pos < t.size()) {
            const auto end = t.find_first_of(" \t", pos);
            const auto token = std::string_view(t).substr(pos, end == std::string::npos ? std::string::npos : end - pos);
            if (!token.empty()) {
                values.push_back(parse_number(token, data_path.string() + ":" + std::to_string(line_no)));
                ++cols;
            }
            if (end == std::string::npos) break;
            pos = end + 1;
        }
        if (cols != n_cols)
            throw Error(ErrorKind::Io, data_path.string() + ":" + std::to_string(line_no) + ": expected " +
                                           std::to_string(n_cols) + " columns, found " + std::to_string(cols));
        ++rows;
    }
    p.wheel_load.resize(static_cast<Eigen::Index>(rows), 2);
    p.accel.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(n_cols - 2));
    for (std::size_t r = 0; r < rows; ++r) {
        const double* row = values.data() + r * n_cols;
        p.wheel_load(static_cast<Eigen::Index>(r), 0) = row[0];
        p.wheel_load(static_cast<Eigen::Index>(r), 1) = row[1];
        for (std::size_t c = 2; c < n_cols; ++c)
            p.accel(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c - 2)) = row[c];
    }
    p.validate();
    return p;
}

std::vector<fs::path> list_passages(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw Error(ErrorKind::Io, "data directory " + dir.string() + " does not exist");
    std::vector<fs::path> out;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".meta") out.push_back(entry.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

// ---------------------------------------------------------------- labels

std::string labels_to_json(const std::string& id, const LabelSet& labels, std::int64_t n_samples) {
    using nlohmann::ordered_json;
    ordered_json sensors = ordered_json::array();
    for (Eigen::Index s = 0; s < labels.crossing_indices.cols(); ++s) {
        std::vector<std::int64_t> idx;
        std::vector<double> unc;
        for (Eigen::Index a = 0; a < labels.crossing_indices.rows(); ++a) {
            idx.push_back(labels.crossing_indices(a, s));
            unc.push_back(labels.uncertainty.size() ? labels.uncertainty(a, s) : 0.0);
        }
        sensors.push_back({{"sensor", s}, {"crossing_indices", idx}, {"uncertainty_m", unc}});
    }
    const ordered_json doc = {{"id", id},
                              {"n_samples", n_samples},
                              {"n_axles", labels.n_axles()},
                              {"axle_velocities", labels.axle_velocities},
                              {"sensors", sensors}};
    return doc.dump(2) + "\n";
}

void write_labels(const fs::path& path, const std::string& id, const LabelSet& labels, std::int64_t n_samples) {
    write_file_atomic(path, labels_to_json(id, labels, n_samples));
}

LabelDocument read_labels(const fs::path& path) {
    using nlohmann::json;
    LabelDocument doc;
    try {
        const json j = json::parse(read_file(path));
        doc.id = j.at("id").get<std::string>();
        doc.n_samples = j.at("n_samples").get<std::int64_t>();
        doc.labels.axle_velocities = j.at("axle_velocities").get<std::vector<double>>();
        const auto& sensors = j.at("sensors");
        const auto n_axles = static_cast<Eigen::Index>(doc.labels.axle_velocities.size());
        const auto n_sensors = static_cast<Eigen::Index>(sensors.size());
        doc.labels.crossing_indices.resize(n_axles, n_sensors);
        doc.labels.uncertainty.resize(n_axles, n_sensors);
        for (Eigen::Index s = 0; s < n_sensors; ++s) {
            const auto idx = sensors[static_cast<std::size_t>(s)].at("crossing_indices").get<std::vector<std::int64_t>>();
            const auto unc = sensors[static_cast<std::size_t>(s)].at("uncertainty_m").get<std::vector<double>>();
            if (static_cast<Eigen::Index>(idx.size()) != n_axles || static_cast<Eigen::Index>(unc.size()) != n_axles)
                throw Error(ErrorKind::Io, path.string() + ": sensor " + std::to_string(s) +
                                               " does not list one entry per axle");
            for (Eigen::Index a = 0; a < n_axles; ++a) {
                doc.labels.crossing_indices(a, s) = idx[static_cast<std::size_t>(a)];
                doc.labels.uncertainty(a, s) = unc[static_cast<std::size_t>(a)];
            }
        }
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Io, path.string() + ": malformed label document: " + e.what());
    }
    doc.labels.targets = ingest::build_binary_labels(doc.labels.crossing_indices, doc.n_samples);
    doc.labels.validate(doc.n_samples);
    return doc;
}

// ---------------------------------------------------------------- scalograms

void write_scalogram(const fs::path& path, const scalogram::Scalogram& s) {
    const std::int64_t header[4] = {s.n_samples(), s.n_scales(), s.n_transforms(), s.window_start()};
    std::string bytes(sizeof header + s.data().size() * sizeof(float), '\0');
    std::memcpy(bytes.data(), header, sizeof header);
    std::memcpy(bytes.data() + sizeof header, s.data().data(), s.data().size() * sizeof(float));
    write_file_atomic(path, bytes);
}

scalogram::Scalogram read_scalogram(const fs::path& path) {
    const std::string bytes = read_file(path);
    std::int64_t header[4] = {};
    if (bytes.size() < sizeof header) throw Error(ErrorKind::Io, path.string() + ": truncated scalogram header");
    std::memcpy(header, bytes.data(), sizeof header);
    const auto [n_s, n_f, n_t, start] = std::tuple{header[0], header[1], header[2], header[3]};
    if (n_s < 0 || n_f < 1 || n_t < 1 || n_f > 4096 || n_t > 4096)
        throw Error(ErrorKind::Io, path.string() + ": corrupt scalogram header");
    const auto count = static_cast<std::size_t>(n_s) * static_cast<std::size_t>(n_f) * static_cast<std::size_t>(n_t);
    if (bytes.size() != sizeof header + count * sizeof(float))
        throw Error(ErrorKind::Io, path.string() + ": scalogram size does not match its header");
    scalogram::Scalogram s(n_s, static_cast<int>(n_f), static_cast<int>(n_t), start);
    std::memcpy(s.data().data(), bytes.data() + sizeof header, count * sizeof(float));
    return s;
}

// ---------------------------------------------------------------- CSV

std::string history_csv(std::span<const detector::EpochRecord> history) {
    std::string out = "epoch,loss,val_precision,val_recall,val_F1\n";
    for (const auto& r : history) {
        out += std::to_string(r.epoch) + "," + format_number(r.loss) + "," + format_number(r.val_precision) + "," +
               format_number(r.val_recall) + "," + format_number(r.val_f1) + "\n";
    }
    return out;
}

std::string report_csv(std::span<const ReportRow> rows) {
    std::string out =
        "passage_id,sensor,threshold,tp,fp,fn,precision,recall,f1,mean_abs_temporal_err,mean_abs_spatial_err\n";
    for (const auto& row : rows) {
        const auto& r = row.report;
        out += csv_field(row.passage_id) + "," + std::to_string(row.sensor) + "," + csv_field(row.threshold) + "," +
               std::to_string(r.counts.tp) + "," + std::to_string(r.counts.fp) + "," + std::to_string(r.counts.fn) +
               "," + format_number(r.scores.precision) + "," + format_number(r.scores.recall) + "," +
               format_number(r.scores.f1) + "," + format_number(r.mean_abs_temporal_error) + "," +
               (std::isnan(r.mean_abs_spatial_error) ? std::string() : format_number(r.mean_abs_spatial_error)) + "\n";
    }
    return out;
}

std::string deviations_csv(std::span<const ReportRow> rows) {
    std::string out = "passage_id,sensor,threshold,gt_index,pred_index,temporal_error,spatial_error\n";
    for (const auto& row : rows) {
        for (const auto& m : row.report.matches) {
            out += csv_field(row.passage_id) + "," + std::to_string(row.sensor) + "," + csv_field(row.threshold) + "," +
                   std::to_string(m.gt_index) + "," + std::to_string(m.pred_index) + "," +
                   std::to_string(m.temporal_error) + "," +
                   (std::isnan(m.spatial_error) ? std::string() : format_number(m.spatial_error)) + "\n";
        }
    }
    return out;
}

// ---------------------------------------------------------------- fingerprints

namespace {

class Sha256 {
public:
    Sha256() : ctx_(EVP_MD_CTX_new()) {
        if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1)
            throw Error(ErrorKind::Io, "cannot initialise SHA-256");
    }
    void update(std::string_view data) { EVP_DigestUpdate(ctx_.get(), data.data(), data.size()); }
    std::string hex() {
        unsigned char digest[EVP_MAX_MD_SIZE];
        unsigned int len = 0;
        EVP_DigestFinal_ex(ctx_.get(), digest, &len);
        static constexpr char kHex[] = "0123456789abcdef";
        std::string out;
        for (unsigned int i = 0; i < len; ++i) {
            out += kHex[digest[i] >> 4];
            out += kHex[digest[i] & 15];
        }
        return out;
    }

private:
    std::unique_ptr<EVP_MD_CTX, DigestDeleter> ctx_;
};

}  // namespace

std::string fingerprint_files(std::span<const fs::path> files) {
    Sha256 sha;
    for (const auto& f : files) {
        sha.update(f.filename().string());
        sha.update(std::string_view("\0", 1));
        sha.update(read_file(f));
    }
    return sha.hex();
}

std::string fingerprint_text(std::string_view text) {
    Sha256 sha;
    sha.update(text);
    return sha.hex();
}

}  // namespace axle::io
