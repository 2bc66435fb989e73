static int read_record_header(const unsigned char *data, size_t size, struct record *rec)
{
    size_t offset = 0;
    unsigned int count;

    if (size < 3)
        return -1;
    rec->type = data[offset];
    offset += 1;
    count = (data[offset] << 8) | data[offset + 1];
    offset += 2;
    rec->count = count;
    rec->payload = data + offset;
    rec->payload_len = size - offset;
    return (int)offset;
}
