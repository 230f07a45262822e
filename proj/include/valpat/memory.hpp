#pragma once

#include "valpat/common.hpp"

namespace valpat {

/// Fixed-capacity FIFO ring of unit-norm embeddings. Enqueued batches
/// overwrite the oldest entries first; snapshot() returns a detached
/// oldest-first copy of the valid rows. Queue contents are gradient
/// constants in every loss.
template <class S>
class NegativeQueue {
 public:
  NegativeQueue(Index capacity, Index dim)
      : buffer_(MatrixX<S>::Zero(capacity, dim)) {
    VALPAT_REQUIRE(capacity >= 1, "NegativeQueue: capacity must be >= 1, got ", capacity);
    VALPAT_REQUIRE(dim >= 1, "NegativeQueue: dim must be >= 1, got ", dim);
  }

  Index capacity() const { return buffer_.rows(); }
  Index dim() const { return buffer_.cols(); }
  Index filled() const { return filled_; }
  Index write_ptr() const { return write_ptr_; }

  void enqueue(const MatRef<S>& batch) {
    VALPAT_REQUIRE(batch.cols() == dim(), "NegativeQueue: batch dim ", batch.cols(),
                   " != queue dim ", dim());
    VALPAT_REQUIRE(batch.rows() <= capacity(), "NegativeQueue: batch of ", batch.rows(),
                   " rows exceeds capacity ", capacity());
    for (Index r = 0; r < batch.rows(); ++r) {
      const S norm = batch.row(r).norm();
      VALPAT_REQUIRE(std::abs(norm - S(1)) <= S(1e-6), "NegativeQueue: row ", r,
                     " is not unit-norm (|x| = ", norm, ")");
    }
    for (Index r = 0; r < batch.rows(); ++r) {
      buffer_.row(write_ptr_) = batch.row(r);
      write_ptr_ = (write_ptr_ + 1) % capacity();
    }
    filled_ = std::min(filled_ + batch.rows(), capacity());
  }

  MatrixX<S> snapshot() const {
    MatrixX<S> out(filled_, dim());
    const Index oldest = (write_ptr_ - filled_ + 2 * capacity()) % capacity();
    for (Index i = 0; i < filled_; ++i) {
      out.row(i) = buffer_.row((oldest + i) % capacity());
    }
    return out;
  }

  /// Checkpoint access; `restore` trusts its input shapes were produced by
  /// `raw_buffer` on an identically sized queue.
  const MatrixX<S>& raw_buffer() const { return buffer_; }
  void restore(const MatrixX<S>& buffer, Index write_ptr, Index filled) {
    VALPAT_REQUIRE(buffer.rows() == capacity() && buffer.cols() == dim(),
                   "NegativeQueue: restore shape mismatch");
    VALPAT_REQUIRE(write_ptr >= 0 && write_ptr < capacity() && filled >= 0 && filled <= capacity(),
                   "NegativeQueue: restore pointers out of range");
    buffer_ = buffer;
    write_ptr_ = write_ptr;
    filled_ = filled;
  }

 private:
  MatrixX<S> buffer_;
  Index write_ptr_{0};
  Index filled_{0};
};

}  // namespace valpat
