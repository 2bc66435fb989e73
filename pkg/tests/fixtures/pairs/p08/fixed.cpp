bool ByteBuffer::append(const uint8_t *src, size_t n)
{
    if (src == nullptr || n == 0) {
        return false;
    }
    if (n > capacity_ - size_) {
        return false;
    }
    std::memcpy(data_ + size_, src, n);
    size_ += n;
    stats_.appended += n;
    return true;
}
