uint32_t crc32_update(uint32_t crc, const unsigned char *buf, size_t len)
{
    size_t i;
    int bit;

    crc = ~crc;
    for (i = 0; i < len; i++) {
        crc ^= buf[i];
        for (bit = 0; bit < 8; bit++)
            crc = (crc >> 1) ^ (0xEDB88320u & (0u - (crc & 1u)));
    }
    return ~crc;
}

char *trim_whitespace(char *s)
{
    char *end;

    while (isspace((unsigned char)*s))
        s++;
    if (*s == '\0')
        return s;
    end = s + strlen(s) - 1;
    while (end > s && isspace((unsigned char)*end))
        end--;
    end[1] = '\0';
    return s;
}

struct node *list_reverse(struct node *head)
{
    struct node *prev = NULL;

    while (head != NULL) {
        struct node *next = head->next;
        head->next = prev;
        prev = head;
        head = next;
    }
    return prev;
}

int parse_port_option(const char *arg, unsigned short *out)
{
    char *endp;
    long v;

    errno = 0;
    v = strtol(arg, &endp, 10);
    if (errno != 0 || *endp != '\0' || v < 1 || v > 65535)
        return -1;
    *out = (unsigned short)v;
    return 0;
}

int open_upload(const char *root, const char *name, int flags)
{
    char path[PATH_MAX];
    int n;

    n = snprintf(path, sizeof(path), "%s/%s", root, name);
    if (n < 0 || (size_t)n >= sizeof(path))
        return -ENAMETOOLONG;
    return open(path, flags, 0644);
}
