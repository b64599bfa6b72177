public class Report {
    private StringBuilder mOut = new StringBuilder();
    private String mHeader;

    public void header() {
        mOut.append(mHeader);
    }

    public void line(String text) {
        <start>sb.append(text);<end>
    }
}
