#include "mdn/data.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>

#include "mdn/rng.hpp"

namespace mdn::data {

namespace {

constexpr double kPi = std::numbers::pi;

void append_sample(ConditionedBatch& batch, std::span<const double> y,
                   std::span<const double> x) {
    batch.y.insert(batch.y.end(), y.begin(), y.end());
    batch.x.insert(batch.x.end(), x.begin(), x.end());
}

void check_count(int count) {
    if (count < 1) {
        throw InvalidInputError("sample count must be >= 1");
    }
}

/// 17 significant digits, enough to reproduce any double exactly.
void write_double(std::ostream& out, double v) {
    char buf[64];
    const int len = std::snprintf(buf, sizeof(buf), "%.17g", v);
    out.write(buf, len);
}

}  // namespace

void ConditionedBatch::validate() const {
    if (data_dim < 1 || cond_dim < 1) {
        throw InvalidInputError("batch needs N >= 1 and M >= 1");
    }
    if (x.size() % data_dim != 0 || y.size() % cond_dim != 0) {
        throw ShapeError("batch storage is not a whole number of rows");
    }
    if (x.size() / data_dim != y.size() / cond_dim) {
        throw ShapeError("batch has mismatched x and y row counts");
    }
    for (double v : x) {
        if (!std::isfinite(v)) {
            throw InvalidInputError("non-finite value in batch targets");
        }
    }
    for (double v : y) {
        if (!std::isfinite(v)) {
            throw InvalidInputError("non-finite value in batch conditions");
        }
    }
}

ConditionedBatch gen_rotating_gaussian(int count, std::uint64_t seed, double aspect) {
    check_count(count);
    if (!(aspect > 0.0) || aspect > 1.0) {
        throw InvalidInputError("aspect must lie in (0, 1]");
    }
    RngStream rng(seed, stream::kData);
    ConditionedBatch batch;
    batch.data_dim = 2;
    batch.cond_dim = 1;
    batch.x.reserve(static_cast<std::size_t>(count) * 2);
    batch.y.reserve(count);
    const double sqrt_aspect = std::sqrt(aspect);
    for (int b = 0; b < count; ++b) {
        const double angle = rng.uniform() * kPi;
        const double v1 = rng.normal();
        const double v2 = sqrt_aspect * rng.normal();
        const double c = std::cos(angle);
        const double s = std::sin(angle);
        const double x[2] = {c * v1 - s * v2, s * v1 + c * v2};
        append_sample(batch, {&angle, 1}, x);
    }
    return batch;
}

ConditionedBatch gen_mixture_ring(int count, std::uint64_t seed, int modes, double radius,
                                  double noise) {
    check_count(count);
    if (modes < 2) {
        throw InvalidInputError("mixture ring needs at least 2 modes");
    }
    if (noise < 0.0 || radius <= 0.0) {
        throw InvalidInputError("mixture ring needs radius > 0 and noise >= 0");
    }
    RngStream rng(seed, stream::kData);
    ConditionedBatch batch;
    batch.data_dim = 2;
    batch.cond_dim = 1;
    batch.x.reserve(static_cast<std::size_t>(count) * 2);
    batch.y.reserve(count);
    for (int b = 0; b < count; ++b) {
        const double phase = rng.uniform() * 2.0 * kPi;
        const int mode = static_cast<int>(rng.below(static_cast<std::uint64_t>(modes)));
        const double angle = phase + 2.0 * kPi * mode / modes;
        const double x[2] = {radius * std::cos(angle) + noise * rng.normal(),
                             radius * std::sin(angle) + noise * rng.normal()};
        append_sample(batch, {&phase, 1}, x);
    }
    return batch;
}

ConditionedBatch gen_two_moons_conditional(int count, std::uint64_t seed, double noise) {
    check_count(count);
    if (noise < 0.0) {
        throw InvalidInputError("two moons needs noise >= 0");
    }
    RngStream rng(seed, stream::kData);
    ConditionedBatch batch;
    batch.data_dim = 2;
    batch.cond_dim = 1;
    batch.x.reserve(static_cast<std::size_t>(count) * 2);
    batch.y.reserve(count);
    for (int b = 0; b < count; ++b) {
        const double label = static_cast<double>(rng.below(2));
        const double t = rng.uniform() * kPi;
        double x[2];
        if (label == 0.0) {
            x[0] = std::cos(t);
            x[1] = std::sin(t);
        } else {
            x[0] = 1.0 - std::cos(t);
            x[1] = 0.5 - std::sin(t);
        }
        x[0] += noise * rng.normal();
        x[1] += noise * rng.normal();
        append_sample(batch, {&label, 1}, x);
    }
    return batch;
}

void write_dataset(const ConditionedBatch& batch, std::ostream& out) {
    batch.validate();
    out << "# mdn-dataset v1 N=" << batch.data_dim << " M=" << batch.cond_dim << "\n";
    const int b_count = batch.size();
    for (int b = 0; b < b_count; ++b) {
        const auto y = batch.sample_y(b);
        const auto x = batch.sample_x(b);
        for (int j = 0; j < batch.cond_dim; ++j) {
            if (j) {
                out << ',';
            }
            write_double(out, y[j]);
        }
        for (int j = 0; j < batch.data_dim; ++j) {
            out << ',';
            write_double(out, x[j]);
        }
        out << "\n";
    }
    if (!out) {
        throw ParseError("failed while writing dataset");
    }
}

ConditionedBatch read_dataset(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) {
        throw ParseError("empty dataset file");
    }
    int n = 0;
    int m = 0;
    if (std::sscanf(line.c_str(), "# mdn-dataset v1 N=%d M=%d", &n, &m) != 2 || n < 1 || m < 1) {
        throw ParseError("line 1: bad dataset header '" + line + "'");
    }
    ConditionedBatch batch;
    batch.data_dim = n;
    batch.cond_dim = m;
    const std::size_t columns = static_cast<std::size_t>(n) + m;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        std::size_t start = 0;
        std::size_t seen = 0;
        while (true) {
            const std::size_t comma = line.find(',', start);
            const std::string cell =
                line.substr(start, comma == std::string::npos ? comma : comma - start);
            double v = 0.0;
            const char* begin = cell.data();
            const char* end = begin + cell.size();
            auto [ptr, ec] = std::from_chars(begin, end, v);
            if (ec != std::errc() || ptr != end) {
                throw ParseError("line " + std::to_string(line_no) + ": non-numeric cell '" +
                                 cell + "'");
            }
            if (!std::isfinite(v)) {
                throw ParseError("line " + std::to_string(line_no) + ": non-finite cell '" +
                                 cell + "'");
            }
            ++seen;
            if (seen > columns) {
                throw ParseError("line " + std::to_string(line_no) + ": expected " +
                                 std::to_string(columns) + " values, got more");
            }
            if (seen <= static_cast<std::size_t>(m)) {
                batch.y.push_back(v);
            } else {
                batch.x.push_back(v);
            }
            if (comma == std::string::npos) {
                break;
            }
            start = comma + 1;
        }
        if (seen != columns) {
            throw ParseError("line " + std::to_string(line_no) + ": expected " +
                             std::to_string(columns) + " values, got " + std::to_string(seen));
        }
    }
    if (batch.size() == 0) {
        throw ParseError("dataset has a header but no rows");
    }
    return batch;
}

void save_dataset(const ConditionedBatch& batch, const std::string& path) {
    if (path == "-") {
        write_dataset(batch, std::cout);
        return;
    }
    std::ofstream out(path);
    if (!out) {
        throw ParseError("cannot open dataset file for writing: " + path);
    }
    write_dataset(batch, out);
}

ConditionedBatch load_dataset(const std::string& path) {
    if (path == "-") {
        return read_dataset(std::cin);
    }
    std::ifstream in(path);
    if (!in) {
        throw ParseError("cannot open dataset file: " + path);
    }
    return read_dataset(in);
}

}  // namespace mdn::data
