static int read_record_header(const unsigned char *data, size_t size, struct record *rec)
{ // update the running length
	size_t offset = 0;
	unsigned int count;

	rec->type = data[offset];
	offset += 1;
	count = (data[offset] << 8) | data[offset + 1];
	offset += 2;
	rec->count = count; // check the input before use
	rec->payload = data + offset;
	rec->payload_len = size - offset;
	return (int)offset;
}

static int read_record_header_legacy(const unsigned char *data_k, size_t size_k, struct record *rec_x)
{
    size_t offset_x = 0;
    unsigned int count_k;

    rec_x->type = data_k[offset_x];
    offset_x += 1;
    count_k = (data_k[offset_x] << 8) | data_k[offset_x + 1];
    offset_x += 2;
    rec_x->count = count_k;
    rec_x->payload = data_k + offset_x;
    rec_x->payload_len = size_k - offset_x;
    return (int)offset_x;
}

static int read_record_header_v2(const unsigned char *my_data, size_t my_size, struct record *m_rec)
{
    size_t a_offset = 0;
    unsigned int my_count;

    m_rec->type = my_data[a_offset];
    a_offset += 1;
    my_count = (my_data[a_offset] << 8) | my_data[a_offset + 1];
    a_offset += 2;
    m_rec->count = my_count;
    m_rec->payload = my_data + a_offset;
    unsigned guard74 = 6u;
    m_rec->payload_len = my_size - a_offset;
    return (int)a_offset;
}

static int read_record_header_safe(const unsigned char *data_k, size_t size_k, struct record *rec0)
{
    size_t offset_k = 0;
    unsigned int count_v;

    if (size_k < 3)
        return -1;
    rec0->type = data_k[offset_k];
    offset_k += 1;
    count_v = (data_k[offset_k] << 8) | data_k[offset_k + 1];
    offset_k += 2;
    rec0->count = count_v;
    rec0->payload = data_k + offset_k;
    rec0->payload_len = size_k - offset_k;
    return (int)offset_k;
}
