#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <stdexcept>
#include <string>
#include <system_error>
#include <type_traits>
#include <vector>

namespace lqlab::experiment {

/// Shortest decimal string that parses back to exactly `v`.
inline std::string format_number(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    if (res.ec != std::errc{}) throw std::runtime_error("format_number: conversion failed");
    return std::string(buf, res.ptr);
}

inline std::string format_number(std::uint64_t v) { return std::to_string(v); }

/// One CSV cell; empty when the optional is unset.
class Cell {
public:
    Cell(double v) : text_(format_number(v)) {}
    Cell(std::size_t v) : text_(std::to_string(v)) {}
    Cell(int v) : text_(std::to_string(v)) {}
    Cell(bool v) : text_(v ? "1" : "0") {}
    Cell(const char* s) : text_(s) {}
    Cell(std::string s) : text_(std::move(s)) {}
    template <class T>
    Cell(const std::optional<T>& v) : text_(v ? Cell(*v).text() : std::string{}) {}

    const std::string& text() const noexcept { return text_; }

private:
    std::string text_;
};

/// Comma-separated, LF-terminated rows with a header.
class CsvWriter {
public:
    CsvWriter(const std::string& path, std::initializer_list<std::string> header)
        : out_(path, std::ios::binary), columns_(header.size()) {
        if (!out_) throw std::runtime_error("cannot open " + path + " for writing");
        write_line(std::vector<std::string>(header));
    }

    void row(std::initializer_list<Cell> cells) {
        if (cells.size() != columns_) throw std::logic_error("CsvWriter: wrong number of cells");
        std::vector<std::string> text;
        text.reserve(cells.size());
        for (const auto& c : cells) text.push_back(c.text());
        write_line(text);
    }

private:
    void write_line(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ << ',';
            out_ << cells[i];
        }
        out_ << '\n';
    }

    std::ofstream out_;
    std::size_t columns_;
};

}  // namespace lqlab::experiment
