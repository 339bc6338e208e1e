#include "fgray/data.hpp"
#include "fgray/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace fgray {

int CompetingRisksData::count(int code) const
{
    return static_cast<int>(std::count(status.begin(), status.end(), code));
}

std::string ValidationReport::summary() const
{
    std::string out;
    for (const auto& v : violations) {
        if (!out.empty()) out += "; ";
        out += v;
    }
    return out;
}

ValidationReport validate(const CompetingRisksData& data)
{
    ValidationReport report;
    auto& v = report.violations;
    const auto n = data.times.size();
    if (data.status.size() != n || static_cast<std::size_t>(data.covariates.rows()) != n) {
        v.push_back("length mismatch between times, status and covariate rows");
        return report;
    }
    if (n < 2) v.push_back("need at least 2 subjects");
    if (data.covariates.cols() < 1) v.push_back("need at least 1 covariate");
    if (!data.ids.empty() && data.ids.size() != n) v.push_back("ids length does not match n");
    if (!(data.horizon > 0.0) || !std::isfinite(data.horizon)) v.push_back("horizon must be a positive finite number");

    for (std::size_t i = 0; i < n; ++i) {
        const auto row = std::to_string(i + 1);
        const int s = data.status[i];
        if (s != kCensored && s != kCause1 && s != kCause2) {
            v.push_back("row " + row + ": invalid status code " + std::to_string(s));
        }
        const double t = data.times[i];
        if (!std::isfinite(t)) {
            v.push_back("row " + row + ": non-finite time");
        } else if (t < 0.0) {
            v.push_back("row " + row + ": negative time");
        } else if (data.horizon > 0.0 && t > data.horizon) {
            v.push_back("row " + row + ": time beyond horizon");
        }
        for (Eigen::Index j = 0; j < data.covariates.cols(); ++j) {
            if (!std::isfinite(data.covariates(static_cast<Eigen::Index>(i), j))) {
                v.push_back("row " + row + ": non-finite covariate in column " + std::to_string(j + 1));
                break;
            }
        }
    }
    if (data.count(kCause1) == 0) v.push_back("no cause-1 events");
    return report;
}

void require_valid(const CompetingRisksData& data)
{
    const auto report = validate(data);
    if (!report.ok()) throw DataError("invalid data: " + report.summary());
}

double default_horizon(const CompetingRisksData& data)
{
    if (data.times.empty()) return 0.0;
    return *std::max_element(data.times.begin(), data.times.end());
}

CompetingRisksData apply_horizon(CompetingRisksData data, double horizon)
{
    for (std::size_t i = 0; i < data.times.size(); ++i) {
        if (data.times[i] > horizon) {
            data.times[i] = horizon;
            data.status[i] = kCensored;
        }
    }
    data.horizon = horizon;
    return data;
}

CompetingRisksData subset(const CompetingRisksData& data, std::span<const int> rows)
{
    CompetingRisksData out;
    out.horizon = data.horizon;
    out.covariate_names = data.covariate_names;
    out.times.reserve(rows.size());
    out.status.reserve(rows.size());
    out.covariates.resize(static_cast<Eigen::Index>(rows.size()), data.covariates.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const int i = rows[r];
        out.times.push_back(data.times[i]);
        out.status.push_back(data.status[i]);
        out.covariates.row(static_cast<Eigen::Index>(r)) = data.covariates.row(i);
        if (!data.ids.empty()) out.ids.push_back(data.ids[i]);
    }
    return out;
}

Vector Standardization::to_original_scale(const Vector& beta_std) const
{
    return beta_std.cwiseQuotient(scales);
}

Vector Standardization::to_standardized_scale(const Vector& beta_orig) const
{
    return beta_orig.cwiseProduct(scales);
}

Standardization identity_standardization(int p)
{
    Standardization s;
    s.means = Vector::Zero(p);
    s.scales = Vector::Ones(p);
    s.kept_columns.resize(p);
    for (int j = 0; j < p; ++j) s.kept_columns[j] = j;
    return s;
}

std::pair<CompetingRisksData, Standardization>
standardize(const CompetingRisksData& data, ConstantColumns policy)
{
    const auto n = data.covariates.rows();
    if (n < 2) throw DataError("standardize: need at least 2 subjects");

    Standardization st;
    std::vector<double> means;
    std::vector<double> scales;
    for (Eigen::Index j = 0; j < data.covariates.cols(); ++j) {
        const auto col = data.covariates.col(j);
        const double mean = col.mean();
        const double ss = (col.array() - mean).square().sum();
        const double sd = std::sqrt(ss / static_cast<double>(n - 1));
        if (!(sd > 0.0)) {
            if (policy == ConstantColumns::kReject) {
                throw DataError("standardize: constant covariate column " + std::to_string(j + 1));
            }
            st.dropped_columns.push_back(static_cast<int>(j));
            continue;
        }
        st.kept_columns.push_back(static_cast<int>(j));
        means.push_back(mean);
        scales.push_back(sd);
    }
    if (st.kept_columns.empty()) throw DataError("standardize: every covariate column is constant");

    const auto kept = static_cast<Eigen::Index>(st.kept_columns.size());
    st.means = Eigen::Map<const Vector>(means.data(), kept);
    st.scales = Eigen::Map<const Vector>(scales.data(), kept);
    st.applied = true;

    CompetingRisksData out = data;
    out.covariates.resize(n, kept);
    if (!data.covariate_names.empty()) out.covariate_names.clear();
    for (Eigen::Index c = 0; c < kept; ++c) {
        const int j = st.kept_columns[c];
        out.covariates.col(c) = (data.covariates.col(j).array() - st.means[c]) / st.scales[c];
        if (!data.covariate_names.empty()) out.covariate_names.push_back(data.covariate_names[j]);
    }
    return {std::move(out), std::move(st)};
}

std::string format_double(double value)
{
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

namespace {

std::vector<std::string> split_line(const std::string& line)
{
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) {
        const auto b = field.find_first_not_of(" \t\r");
        const auto e = field.find_last_not_of(" \t\r");
        out.push_back(b == std::string::npos ? std::string() : field.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_number(const std::string& field, std::size_t row, const std::string& column)
{
    double value = 0.0;
    const char* first = field.data();
    const char* last = first + field.size();
    if (!field.empty() && *first == '+') ++first;
    const auto res = std::from_chars(first, last, value);
    if (field.empty() || res.ec != std::errc() || res.ptr != last) {
        throw DataError("parse error at row " + std::to_string(row) + ", column '" + column +
                        "': '" + field + "' is not a number");
    }
    return value;
}

} // namespace

CompetingRisksData load_csv(const std::string& path, const CsvSchema& schema)
{
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");

    std::string line;
    if (!std::getline(in, line)) throw DataError("'" + path + "' is empty");
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    const auto header = split_line(line);

    int time_idx = -1;
    int status_idx = -1;
    int id_idx = -1;
    std::vector<int> cov_idx;
    CompetingRisksData data;
    for (std::size_t c = 0; c < header.size(); ++c) {
        const auto& name = header[c];
        if (name == schema.time_col) {
            time_idx = static_cast<int>(c);
        } else if (name == schema.status_col) {
            status_idx = static_cast<int>(c);
        } else if (!schema.id_col.empty() && name == schema.id_col) {
            id_idx = static_cast<int>(c);
        } else {
            cov_idx.push_back(static_cast<int>(c));
            data.covariate_names.push_back(name);
        }
    }
    if (time_idx < 0) throw DataError("schema error: missing time column '" + schema.time_col + "'");
    if (status_idx < 0) throw DataError("schema error: missing status column '" + schema.status_col + "'");
    if (!schema.id_col.empty() && id_idx < 0) throw DataError("schema error: missing id column '" + schema.id_col + "'");
    if (cov_idx.empty()) throw DataError("schema error: no covariate columns");

    std::vector<double> values;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto fields = split_line(line);
        if (fields.size() != header.size()) {
            throw DataError("parse error at row " + std::to_string(row) + ": expected " +
                            std::to_string(header.size()) + " fields, found " + std::to_string(fields.size()));
        }
        data.times.push_back(parse_number(fields[time_idx], row, schema.time_col));
        const double s = parse_number(fields[status_idx], row, schema.status_col);
        if (s != std::floor(s)) {
            throw DataError("parse error at row " + std::to_string(row) + ", column '" + schema.status_col +
                            "': status must be an integer code");
        }
        data.status.push_back(static_cast<int>(s));
        if (id_idx >= 0) data.ids.push_back(fields[id_idx]);
        for (int c : cov_idx) values.push_back(parse_number(fields[c], row, header[c]));
    }

    const auto n = static_cast<Eigen::Index>(data.times.size());
    const auto p = static_cast<Eigen::Index>(cov_idx.size());
    data.covariates = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        values.data(), n, p);

    if (schema.horizon) {
        if (!(*schema.horizon > 0.0)) throw DataError("horizon must be positive");
        data = apply_horizon(std::move(data), *schema.horizon);
    } else {
        data.horizon = default_horizon(data);
    }
    require_valid(data);
    return data;
}

void save_csv(const CompetingRisksData& data, const std::string& path)
{
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << "time,status";
    if (!data.ids.empty()) out << ",id";
    for (int j = 0; j < data.p(); ++j) {
        out << ',';
        if (static_cast<int>(data.covariate_names.size()) == data.p()) {
            out << data.covariate_names[j];
        } else {
            out << 'z' << (j + 1);
        }
    }
    out << '\n';
    for (int i = 0; i < data.n(); ++i) {
        out << format_double(data.times[i]) << ',' << data.status[i];
        if (!data.ids.empty()) out << ',' << data.ids[i];
        for (int j = 0; j < data.p(); ++j) out << ',' << format_double(data.covariates(i, j));
        out << '\n';
    }
    if (!out) throw DataError("failed writing '" + path + "'");
}

} // namespace fgray
