#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace lgm {

/// n x p table of variable configurations. Cells hold alphabet indices;
/// binary data encodes -1 -> 0 and +1 -> 1.
struct SampleMatrix {
    std::vector<int> column_ids;       ///< node ids, one per column
    int alphabet_size = 2;
    std::vector<std::uint8_t> cells;   ///< row-major, rows() x column_ids.size()

    std::size_t cols() const { return column_ids.size(); }
    std::size_t rows() const { return column_ids.empty() ? 0 : cells.size() / column_ids.size(); }

    std::uint8_t at(std::size_t row, std::size_t col) const {
        return cells[row * column_ids.size() + col];
    }

    /// +-1 spin value of a binary cell.
    int spin(std::size_t row, std::size_t col) const { return at(row, col) ? 1 : -1; }

    int column_of(int node_id) const {
        for (std::size_t c = 0; c < column_ids.size(); ++c)
            if (column_ids[c] == node_id) return static_cast<int>(c);
        throw std::invalid_argument("node id " + std::to_string(node_id) + " not a sample column");
    }

    void validate() const {
        for (std::size_t i = 0; i < column_ids.size(); ++i)
            for (std::size_t j = i + 1; j < column_ids.size(); ++j)
                if (column_ids[i] == column_ids[j])
                    throw std::invalid_argument("duplicate sample column id");
        for (auto c : cells)
            if (c >= alphabet_size) throw std::invalid_argument("cell outside alphabet");
        if (!column_ids.empty() && cells.size() % column_ids.size() != 0)
            throw std::invalid_argument("ragged sample matrix");
    }
};

}  // namespace lgm
